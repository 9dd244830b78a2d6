//! Distribution files: JSON `{"dim", "points", "weights"}` or CSV with
//! columns `x1..xd,weight`. Weights are optional and default to uniform.

use std::path::Path;

use scenred::{format_g17, DiscreteDistribution};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionFile {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl DistributionFile {
    pub fn into_distribution(self) -> Result<DiscreteDistribution, CliError> {
        if let Some(bad) = self.points.iter().position(|p| p.len() != self.dim) {
            return Err(CliError::Validation(format!(
                "point {} has {} coordinates, header says dim = {}",
                bad + 1,
                self.points[bad].len(),
                self.dim
            )));
        }
        let dist = match self.weights {
            Some(w) => DiscreteDistribution::new(self.points, w)?,
            None => DiscreteDistribution::uniform(self.points)?,
        };
        Ok(dist)
    }

    pub fn from_distribution(dist: &DiscreteDistribution) -> Self {
        DistributionFile { dim: dist.dim(), points: dist.points().to_vec(), weights: Some(dist.weights().to_vec()) }
    }
}

pub fn parse_json(text: &str) -> Result<DiscreteDistribution, CliError> {
    let file: DistributionFile =
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("invalid distribution JSON: {e}")))?;
    file.into_distribution()
}

pub fn parse_csv(text: &str) -> Result<DiscreteDistribution, CliError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| CliError::Validation(format!("invalid CSV header: {e}")))?.clone();
    let has_weight = header.iter().next_back() == Some("weight");
    let dim = header.len() - usize::from(has_weight);
    for (k, name) in header.iter().take(dim).enumerate() {
        if name != format!("x{}", k + 1) {
            return Err(CliError::Validation(format!("unexpected CSV column {name:?}, want x{}", k + 1)));
        }
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Validation(format!("CSV row {}: {e}", row + 1)))?;
        let values: Vec<f64> = record
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Validation(format!("CSV row {}: {e}", row + 1)))?;
        if has_weight {
            weights.push(values[dim]);
        }
        points.push(values[..dim].to_vec());
    }
    DistributionFile { dim, points, weights: has_weight.then_some(weights) }.into_distribution()
}

pub fn to_json(dist: &DiscreteDistribution) -> String {
    let mut s = serde_json::to_string_pretty(&DistributionFile::from_distribution(dist)).expect("plain data");
    s.push('\n');
    s
}

pub fn to_csv(dist: &DiscreteDistribution) -> String {
    let mut out = (1..=dist.dim()).map(|k| format!("x{k}")).collect::<Vec<_>>().join(",");
    out.push_str(",weight\n");
    for (p, w) in dist.points().iter().zip(dist.weights()) {
        for x in p {
            out.push_str(&format_g17(*x));
            out.push(',');
        }
        out.push_str(&format_g17(*w));
        out.push('\n');
    }
    out
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

pub fn read_distribution(path: &Path) -> Result<DiscreteDistribution, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    if is_csv(path) {
        parse_csv(&text)
    } else {
        parse_json(&text)
    }
}

pub fn write_distribution(path: &Path, dist: &DiscreteDistribution) -> Result<(), CliError> {
    let text = if is_csv(path) { to_csv(dist) } else { to_json(dist) };
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DiscreteDistribution {
        DiscreteDistribution::new(vec![vec![0.1, -2.5e-7], vec![1.0 / 3.0, 1e20], vec![-0.0, 7.0]], vec![0.1, 0.2, 0.7])
            .unwrap()
    }

    fn bits(d: &DiscreteDistribution) -> Vec<u64> {
        d.points().iter().flatten().chain(d.weights()).map(|x| x.to_bits()).collect()
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let d = sample();
        assert_eq!(bits(&parse_json(&to_json(&d)).unwrap()), bits(&d));
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let d = sample();
        let text = to_csv(&d);
        assert!(text.starts_with("x1,x2,weight\n0.10000000000000001,"));
        assert_eq!(bits(&parse_csv(&text).unwrap()), bits(&d));
    }

    #[test]
    fn weights_default_to_uniform() {
        let d = parse_json(r#"{"dim": 1, "points": [[0], [2]]}"#).unwrap();
        assert_eq!(d.weights(), &[0.5, 0.5]);
        let d = parse_csv("x1,x2\n0,0\n1,1\n2,2\n").unwrap();
        assert_eq!(d.len(), 3);
        assert!(d.is_uniform());
    }

    #[test]
    fn bad_files_are_validation_errors() {
        for text in [
            r#"{"dim": 2, "points": [[0]]}"#,
            r#"{"dim": 1, "points": [[0], [1]], "weights": [0.5, 0.6]}"#,
            r#"{"dim": 1}"#,
            "not json",
        ] {
            assert!(matches!(parse_json(text), Err(CliError::Validation(_))), "{text}");
        }
        assert!(matches!(parse_csv("a,b\n1,2\n"), Err(CliError::Validation(_))));
        assert!(matches!(parse_csv("x1,weight\nfoo,1\n"), Err(CliError::Validation(_))));
    }
}
