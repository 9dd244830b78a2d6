//! Color quantization as discrete scenario reduction: image histograms,
//! median-cut pre-reduction, palette selection and optimality-gap reports.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::distribution::{DiscreteDistribution, Metric, Norm};
use crate::error::{Error, Result};
use crate::exact::{binomial, discrete_exact, DEFAULT_BUDGET};
use crate::heuristics::{dupacova_greedy, local_search, LocalSearchInit, SwapStrategy};
use crate::transport::{dist_to_support, nearest};

pub type Rgb = [u8; 3];

/// Row-major 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRaster {
    width: usize,
    height: usize,
    pixels: Vec<Rgb>,
}

impl ImageRaster {
    pub fn new(width: usize, height: usize, pixels: Vec<Rgb>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Image(format!("empty image {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::Image(format!("{} pixels for a {width}x{height} image", pixels.len())));
        }
        Ok(ImageRaster { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    /// Parses a binary PPM (P6) with a maximum channel value of 255.
    pub fn from_ppm(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut header = Vec::with_capacity(4);
        while header.len() < 4 {
            while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
                if bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    pos += 1;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
                pos += 1;
            }
            if start == pos {
                return Err(Error::Image("truncated PPM header".into()));
            }
            header.push(std::str::from_utf8(&bytes[start..pos]).unwrap_or("").to_string());
        }
        if header[0] != "P6" {
            return Err(Error::Image(format!("expected P6 magic, found {:?}", header[0])));
        }
        let field = |s: &str, what: &str| s.parse::<usize>().map_err(|_| Error::Image(format!("bad PPM {what} {s:?}")));
        let width = field(&header[1], "width")?;
        let height = field(&header[2], "height")?;
        let maxval = field(&header[3], "maxval")?;
        if maxval != 255 {
            return Err(Error::Image(format!("only maxval 255 is supported, found {maxval}")));
        }
        if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
            return Err(Error::Image("missing separator after PPM header".into()));
        }
        pos += 1;
        let data = &bytes[pos..];
        let need = width * height * 3;
        if data.len() < need {
            return Err(Error::Image(format!("PPM data has {} bytes, expected {need}", data.len())));
        }
        let pixels = data[..need].chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        ImageRaster::new(width, height, pixels)
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.pixels.len() * 3);
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }

    pub fn read_ppm(mut reader: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes)?;
        ImageRaster::from_ppm(&bytes)
    }

    pub fn write_ppm(&self, mut writer: impl Write) -> Result<()> {
        writer.write_all(&self.to_ppm())?;
        Ok(())
    }

    /// Loads a PPM, or a PNG when built with the `png` feature.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path)?;
        if bytes.starts_with(b"P6") {
            return ImageRaster::from_ppm(&bytes);
        }
        #[cfg(feature = "png")]
        if bytes.starts_with(b"\x89PNG") {
            return ImageRaster::from_png(&bytes);
        }
        Err(Error::Image(format!("{}: unsupported image format", path.display())))
    }

    #[cfg(feature = "png")]
    pub fn from_png(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
            .map_err(|e| Error::Image(e.to_string()))?
            .to_rgb8();
        let (w, h) = img.dimensions();
        let pixels = img.pixels().map(|p| p.0).collect();
        ImageRaster::new(w as usize, h as usize, pixels)
    }
}

/// Distinct colors as atoms in R^3, weighted by pixel frequency, in
/// lexicographic color order.
pub fn image_histogram(image: &ImageRaster) -> Result<DiscreteDistribution> {
    let mut counts: BTreeMap<Rgb, usize> = BTreeMap::new();
    for &p in image.pixels() {
        *counts.entry(p).or_default() += 1;
    }
    let total = image.pixels().len() as f64;
    let (points, weights) = counts
        .into_iter()
        .map(|(c, k)| (c.iter().map(|&v| f64::from(v)).collect::<Vec<f64>>(), k as f64 / total))
        .unzip();
    DiscreteDistribution::new(points, weights)
}

/// Median-cut reduction of a color histogram to at most `n_target` colors.
///
/// Repeatedly splits the box with the widest channel range at the weighted
/// median of that channel. Each box becomes its weighted mean color rounded
/// to integer channels; boxes rounding to the same color are merged.
pub fn pre_reduce(hist: &DiscreteDistribution, n_target: usize) -> Result<DiscreteDistribution> {
    if n_target == 0 {
        return Err(Error::OutOfRange("target color count must be positive".into()));
    }
    if hist.len() <= n_target {
        return Ok(hist.clone());
    }
    let w = hist.weights();
    let channels = hist.dim();
    let range = |cell: &[usize], k: usize| {
        let (lo, hi) = cell.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            (lo.min(hist.point(i)[k]), hi.max(hist.point(i)[k]))
        });
        hi - lo
    };
    let mut boxes: Vec<Vec<usize>> = vec![(0..hist.len()).collect()];
    while boxes.len() < n_target {
        let mut pick: Option<(usize, usize, f64)> = None;
        for (b, cell) in boxes.iter().enumerate() {
            if cell.len() < 2 {
                continue;
            }
            for k in 0..channels {
                let r = range(cell, k);
                if r > 0.0 && pick.is_none_or(|(_, _, best)| r > best) {
                    pick = Some((b, k, r));
                }
            }
        }
        let Some((b, k, _)) = pick else { break };
        let mut cell = std::mem::take(&mut boxes[b]);
        cell.sort_by(|&x, &y| hist.point(x)[k].total_cmp(&hist.point(y)[k]).then(x.cmp(&y)));
        let mass: f64 = cell.iter().map(|&i| w[i]).sum();
        let mut acc = 0.0;
        let mut cut = cell.len() - 1;
        for (pos, &i) in cell.iter().enumerate() {
            acc += w[i];
            if acc >= 0.5 * mass {
                cut = pos + 1;
                break;
            }
        }
        let cut = cut.clamp(1, cell.len() - 1);
        let upper = cell.split_off(cut);
        boxes[b] = cell;
        boxes.push(upper);
    }
    let mut merged: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
    for cell in &boxes {
        let mass: f64 = cell.iter().map(|&i| w[i]).sum();
        let color: Vec<u64> = (0..channels)
            .map(|k| {
                let mean = cell.iter().map(|&i| w[i] * hist.point(i)[k]).sum::<f64>() / mass;
                mean.round().clamp(0.0, 255.0) as u64
            })
            .collect();
        *merged.entry(color).or_default() += mass;
    }
    let (points, weights) =
        merged.into_iter().map(|(c, q)| (c.into_iter().map(|v| v as f64).collect::<Vec<f64>>(), q)).unzip();
    DiscreteDistribution::new(points, weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PaletteAlgorithm {
    /// Greedy forward selection.
    Dpcv,
    /// Local search started from the greedy palette.
    Loc1,
    /// Local search started from the most frequent colors.
    Loc2,
    /// Exhaustive search over palettes.
    Exact,
}

impl PaletteAlgorithm {
    pub fn label(self) -> &'static str {
        match self {
            PaletteAlgorithm::Dpcv => "dpcv",
            PaletteAlgorithm::Loc1 => "loc1",
            PaletteAlgorithm::Loc2 => "loc2",
            PaletteAlgorithm::Exact => "exact",
        }
    }
}

impl std::str::FromStr for PaletteAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dpcv" => Ok(PaletteAlgorithm::Dpcv),
            "loc1" => Ok(PaletteAlgorithm::Loc1),
            "loc2" => Ok(PaletteAlgorithm::Loc2),
            "exact" => Ok(PaletteAlgorithm::Exact),
            other => Err(Error::OutOfRange(format!("unknown palette algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    Exact,
    BestKnown,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapEntry {
    pub algorithm: String,
    pub value: f64,
    /// `value / reference - 1`.
    pub gap: f64,
    pub seconds: f64,
    pub reference: Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub m: usize,
    pub n_pre: usize,
    /// Set when `m` exceeded the number of available colors and was lowered.
    pub clamped: bool,
    pub reference: Reference,
    pub reference_value: f64,
    /// Distance from the full color histogram to the remapped image's.
    pub remap_value: f64,
    pub entries: Vec<GapEntry>,
}

impl GapReport {
    pub fn entry(&self, algorithm: PaletteAlgorithm) -> Option<&GapEntry> {
        self.entries.iter().find(|e| e.algorithm == algorithm.label())
    }
}

#[derive(Debug, Clone)]
pub struct QuantizeOptions {
    pub m: usize,
    pub algorithm: PaletteAlgorithm,
    pub n_pre: usize,
    /// Largest number of palettes the exhaustive search may enumerate.
    pub budget: u64,
}

impl QuantizeOptions {
    pub fn new(m: usize, algorithm: PaletteAlgorithm, n_pre: usize) -> Self {
        QuantizeOptions { m, algorithm, n_pre, budget: DEFAULT_BUDGET }
    }
}

#[derive(Debug, Clone)]
pub struct Quantized {
    pub palette: Vec<Rgb>,
    pub image: ImageRaster,
    pub report: GapReport,
}

fn color_metric() -> Metric {
    Metric::l1(Norm::L1)
}

fn to_rgb(p: &[f64]) -> Rgb {
    [0, 1, 2].map(|k| p[k].round().clamp(0.0, 255.0) as u8)
}

/// Replaces every pixel by its nearest palette color in the 1-norm, lowest
/// palette index on ties.
pub fn remap(image: &ImageRaster, palette: &[Rgb]) -> Result<ImageRaster> {
    if palette.is_empty() {
        return Err(Error::Empty("palette"));
    }
    let metric = color_metric();
    let centers: Vec<Vec<f64>> = palette.iter().map(|c| c.iter().map(|&v| f64::from(v)).collect()).collect();
    let mut cache: HashMap<Rgb, Rgb> = HashMap::new();
    let pixels = image
        .pixels()
        .iter()
        .map(|px| {
            *cache.entry(*px).or_insert_with(|| {
                let x: Vec<f64> = px.iter().map(|&v| f64::from(v)).collect();
                palette[nearest(&x, &centers, &metric).0]
            })
        })
        .collect();
    ImageRaster::new(image.width(), image.height(), pixels)
}

/// Builds a palette of `m` colors with the chosen algorithm and remaps the
/// image. The greedy and both local-search palettes are always computed for
/// the report, and the exhaustive one whenever it fits the budget.
///
/// Report values are type-1 distances under the 1-norm measured on the
/// pre-reduced histogram; `remap_value` is measured on the full histogram.
pub fn quantize_image(image: &ImageRaster, options: &QuantizeOptions) -> Result<Quantized> {
    if options.m == 0 {
        return Err(Error::OutOfRange("palette size must be positive".into()));
    }
    let metric = color_metric();
    let hist = image_histogram(image)?;
    let reduced = pre_reduce(&hist, options.n_pre)?;
    let n = reduced.len();
    let clamped = options.m > n;
    let m = options.m.min(n);
    let exact_fits = binomial(n, m) <= options.budget as f64;
    if options.algorithm == PaletteAlgorithm::Exact && !exact_fits {
        return Err(Error::BudgetExceeded { required: binomial(n, m), budget: options.budget });
    }

    let mut runs: Vec<(PaletteAlgorithm, f64, f64, Vec<usize>)> = Vec::new();
    let timed = |f: &mut dyn FnMut() -> Result<crate::ReductionResult>| -> Result<(crate::ReductionResult, f64)> {
        let start = Instant::now();
        let r = f()?;
        Ok((r, start.elapsed().as_secs_f64()))
    };
    let (dpcv, t) = timed(&mut || dupacova_greedy(&reduced, m, &metric))?;
    let dpcv_idx = dpcv.support_indices.clone().unwrap_or_default();
    runs.push((PaletteAlgorithm::Dpcv, dpcv.value, t, dpcv_idx.clone()));
    let (loc1, t) = timed(&mut || {
        local_search(&reduced, m, &metric, LocalSearchInit::Indices(dpcv_idx.clone()), SwapStrategy::BestFit, 0.0)
    })?;
    runs.push((PaletteAlgorithm::Loc1, loc1.value, t, loc1.support_indices.unwrap_or_default()));
    let (loc2, t) =
        timed(&mut || local_search(&reduced, m, &metric, LocalSearchInit::MostFrequent, SwapStrategy::BestFit, 0.0))?;
    runs.push((PaletteAlgorithm::Loc2, loc2.value, t, loc2.support_indices.unwrap_or_default()));
    if exact_fits {
        let (ex, t) = timed(&mut || discrete_exact(&reduced, m, &metric, options.budget))?;
        runs.push((PaletteAlgorithm::Exact, ex.value, t, ex.support_indices.unwrap_or_default()));
    }

    let (reference, reference_value) = match runs.iter().find(|r| r.0 == PaletteAlgorithm::Exact) {
        Some(r) => (Reference::Exact, r.1),
        None => (Reference::BestKnown, runs.iter().map(|r| r.1).fold(f64::INFINITY, f64::min)),
    };
    let gap = |v: f64| {
        if reference_value > 0.0 {
            v / reference_value - 1.0
        } else if v == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    };
    let entries = runs
        .iter()
        .map(|(a, v, t, _)| GapEntry {
            algorithm: a.label().to_string(),
            value: *v,
            gap: gap(*v),
            seconds: *t,
            reference,
        })
        .collect();

    let chosen = &runs.iter().find(|r| r.0 == options.algorithm).expect("chosen algorithm ran").3;
    let palette: Vec<Rgb> = chosen.iter().map(|&i| to_rgb(reduced.point(i))).collect();
    let centers: Vec<Vec<f64>> = palette.iter().map(|c| c.iter().map(|&v| f64::from(v)).collect()).collect();
    let remap_value = dist_to_support(&hist, &centers, &metric)?.value;
    let remapped = remap(image, &palette)?;
    Ok(Quantized {
        palette,
        image: remapped,
        report: GapReport { m, n_pre: options.n_pre, clamped, reference, reference_value, remap_value, entries },
    })
}
