//! Per-pixel phase linking over image stacks with sliding windows.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{pd_sqrt, CVector, HermitianCov, DEFAULT_JITTER};
use crate::mm::{solve_offline, solve_sequential, Distance, MMConfig};
use crate::plugins::{estimate, PluginSpec, SampleStack};
use crate::torus::{wrap_angle, TorusPhases};

/// `l` co-registered complex images, stored image-major then row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageStack {
    l: usize,
    height: usize,
    width: usize,
    data: Vec<Complex64>,
}

impl ImageStack {
    pub fn new(l: usize, height: usize, width: usize, data: Vec<Complex64>) -> Result<Self> {
        if l == 0 || height == 0 || width == 0 {
            return Err(Error::param(format!("stack dimensions must be positive, got {l}x{height}x{width}")));
        }
        if data.len() != l * height * width {
            return Err(Error::dims(format!("{} values for a {l}x{height}x{width} stack", data.len())));
        }
        Ok(Self { l, height, width, data })
    }

    pub fn zeros(l: usize, height: usize, width: usize) -> Result<Self> {
        Self::new(l, height, width, vec![Complex64::new(0.0, 0.0); l * height * width])
    }

    /// Builds the stack from a per-pixel sample function returning `l` values.
    pub fn from_pixels(l: usize, height: usize, width: usize, f: impl Fn(usize, usize) -> CVector) -> Result<Self> {
        let mut stack = Self::zeros(l, height, width)?;
        for r in 0..height {
            for c in 0..width {
                let v = f(r, c);
                if v.len() != l {
                    return Err(Error::dims(format!("pixel vector of length {} for l = {l}", v.len())));
                }
                for (i, z) in v.iter().enumerate() {
                    stack.set(i, r, c, *z);
                }
            }
        }
        Ok(stack)
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    fn index(&self, image: usize, row: usize, col: usize) -> usize {
        (image * self.height + row) * self.width + col
    }

    pub fn get(&self, image: usize, row: usize, col: usize) -> Complex64 {
        self.data[self.index(image, row, col)]
    }

    pub fn set(&mut self, image: usize, row: usize, col: usize, value: Complex64) {
        let i = self.index(image, row, col);
        self.data[i] = value;
    }

    pub fn pixel(&self, row: usize, col: usize) -> Vec<Complex64> {
        (0..self.l).map(|i| self.get(i, row, col)).collect()
    }

    /// Images `start .. start + len`.
    pub fn images(&self, start: usize, len: usize) -> Result<Self> {
        if len == 0 || start + len > self.l {
            return Err(Error::OutOfRange(format!("images {start}..{} of {}", start + len, self.l)));
        }
        let plane = self.height * self.width;
        Self::new(len, self.height, self.width, self.data[start * plane..(start + len) * plane].to_vec())
    }

    /// Stacks the images of `other` after those of `self`.
    pub fn concat(&self, other: &ImageStack) -> Result<Self> {
        if self.height != other.height || self.width != other.width {
            return Err(Error::dims(format!(
                "{}x{} raster with {}x{} raster",
                self.height, self.width, other.height, other.width
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Self::new(self.l + other.l, self.height, self.width, data)
    }
}

/// Per-pixel phase vectors in radians. Masked pixels hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRaster {
    count: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
    mask: Vec<bool>,
    undersampled: Vec<bool>,
}

impl PhaseRaster {
    pub fn new(count: usize, height: usize, width: usize, data: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        let pixels = height * width;
        if count == 0 || pixels == 0 {
            return Err(Error::param(format!("raster dimensions must be positive, got {count}x{height}x{width}")));
        }
        if data.len() != pixels * count || mask.len() != pixels {
            return Err(Error::dims(format!(
                "{} angles and {} mask bits for {count} phases on {height}x{width}",
                data.len(),
                mask.len()
            )));
        }
        let mut data = data;
        for (p, &m) in mask.iter().enumerate() {
            let px = &mut data[p * count..(p + 1) * count];
            if m {
                px.fill(f64::NAN);
            } else if let Some(t) = px.iter().find(|t| !t.is_finite()) {
                return Err(Error::Format(format!("non-finite angle {t} at unmasked pixel {p}")));
            } else {
                px.iter_mut().for_each(|t| *t = wrap_angle(*t));
            }
        }
        Ok(Self { count, height, width, data, mask, undersampled: vec![false; pixels] })
    }

    /// The same phase vector at every pixel.
    pub fn constant(phases: &TorusPhases, height: usize, width: usize) -> Result<Self> {
        let angles = phases.angles();
        let data = (0..height * width).flat_map(|_| angles.iter().copied()).collect();
        Self::new(phases.dim(), height, width, data, vec![false; height * width])
    }

    pub fn with_undersampled(mut self, flags: Vec<bool>) -> Result<Self> {
        if flags.len() != self.height * self.width {
            return Err(Error::dims(format!("{} flags for {} pixels", flags.len(), self.height * self.width)));
        }
        self.undersampled = flags;
        Ok(self)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn undersampled(&self) -> &[bool] {
        &self.undersampled
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn is_masked(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.width + col]
    }

    pub fn angles_at(&self, row: usize, col: usize) -> &[f64] {
        let p = row * self.width + col;
        &self.data[p * self.count..(p + 1) * self.count]
    }

    /// Phases at an unmasked pixel.
    pub fn phases_at(&self, row: usize, col: usize) -> Option<TorusPhases> {
        (!self.is_masked(row, col)).then(|| TorusPhases::from_angles(self.angles_at(row, col)))
    }

    /// Appends the phases of `other` after those of `self` at every pixel.
    /// A pixel masked in either input is masked in the result.
    pub fn concat(&self, other: &PhaseRaster) -> Result<Self> {
        if self.height != other.height || self.width != other.width {
            return Err(Error::dims(format!(
                "{}x{} raster with {}x{} raster",
                self.height, self.width, other.height, other.width
            )));
        }
        let count = self.count + other.count;
        let pixels = self.height * self.width;
        let mut data = Vec::with_capacity(pixels * count);
        let mut mask = Vec::with_capacity(pixels);
        for p in 0..pixels {
            data.extend_from_slice(&self.data[p * self.count..(p + 1) * self.count]);
            data.extend_from_slice(&other.data[p * other.count..(p + 1) * other.count]);
            mask.push(self.mask[p] || other.mask[p]);
        }
        let undersampled = self.undersampled.iter().zip(&other.undersampled).map(|(a, b)| *a || *b).collect();
        Self::new(count, self.height, self.width, data, mask)?.with_undersampled(undersampled)
    }
}

fn window_range(center: usize, win: usize, len: usize) -> std::ops::Range<usize> {
    let start = center as isize - (win / 2) as isize;
    let end = start + win as isize;
    (start.max(0) as usize)..(end.min(len as isize) as usize)
}

/// Number of pixels in the clipped window centered at `(row, col)`.
pub fn window_size(height: usize, width: usize, row: usize, col: usize, win: usize) -> usize {
    window_range(row, win, height).len() * window_range(col, win, width).len()
}

/// Sample vectors of the `win × win` window around `(row, col)`, spanning
/// rows `row − ⌊win/2⌋ .. row − ⌊win/2⌋ + win` and the same for columns,
/// clipped at the raster border.
pub fn sliding_window_extract(stack: &ImageStack, row: usize, col: usize, win: usize) -> Result<SampleStack> {
    if win == 0 {
        return Err(Error::param("window size must be at least 1"));
    }
    if row >= stack.height || col >= stack.width {
        return Err(Error::OutOfRange(format!("pixel ({row}, {col}) outside {}x{} raster", stack.height, stack.width)));
    }
    let mut samples = Vec::new();
    for r in window_range(row, win, stack.height) {
        for c in window_range(col, win, stack.width) {
            samples.push(stack.pixel(r, c));
        }
    }
    SampleStack::new(samples)
}

/// Per-pixel result carrying the undersampled flag alongside the phases.
struct PixelOutcome {
    angles: Option<Vec<f64>>,
    undersampled: bool,
}

fn run_pixels(
    height: usize,
    width: usize,
    count: usize,
    f: impl Fn(usize, usize) -> PixelOutcome + Sync,
) -> Result<PhaseRaster> {
    let outcomes: Vec<PixelOutcome> = (0..height * width).into_par_iter().map(|p| f(p / width, p % width)).collect();
    let mut data = Vec::with_capacity(height * width * count);
    let mut mask = Vec::with_capacity(height * width);
    let mut under = Vec::with_capacity(height * width);
    for o in outcomes {
        match o.angles {
            Some(a) => {
                data.extend(a);
                mask.push(false);
            }
            None => {
                data.extend(std::iter::repeat_n(f64::NAN, count));
                mask.push(true);
            }
        }
        under.push(o.undersampled);
    }
    PhaseRaster::new(count, height, width, data, mask)?.with_undersampled(under)
}

fn pixel_plugin(
    stack: &ImageStack,
    row: usize,
    col: usize,
    win: usize,
    spec: &PluginSpec,
) -> Option<(HermitianCov, bool)> {
    let samples = sliding_window_extract(stack, row, col, win).ok()?;
    let undersampled = samples.n() < samples.l();
    let sigma = estimate(&samples, spec).ok()?;
    (sigma.trace() > 0.0 && sigma.trace().is_finite()).then_some((sigma, undersampled))
}

fn check_pipeline(win: usize, cfg: &MMConfig) -> Result<()> {
    if win == 0 {
        return Err(Error::param("window size must be at least 1"));
    }
    cfg.validate()
}

/// Offline fit at every pixel. Pixels whose plug-in vanishes or whose solve
/// fails are masked.
pub fn process_stack_offline(
    stack: &ImageStack,
    spec: &PluginSpec,
    distance: Distance,
    win: usize,
    cfg: &MMConfig,
) -> Result<PhaseRaster> {
    check_pipeline(win, cfg)?;
    if stack.l < 2 {
        return Err(Error::param("offline processing needs at least 2 images"));
    }
    run_pixels(stack.height, stack.width, stack.l, |r, c| match pixel_plugin(stack, r, c, win, spec) {
        Some((sigma, undersampled)) => {
            PixelOutcome { angles: solve_offline(distance, &sigma, cfg).ok().map(|s| s.phases.angles()), undersampled }
        }
        None => {
            PixelOutcome { angles: None, undersampled: window_size(stack.height, stack.width, r, c, win) < stack.l }
        }
    })
}

/// Sequential fit of the `k` images of `stack_new` at every pixel, holding
/// the stored past phases fixed. The full plug-in is rebuilt from both stacks.
pub fn process_stack_sequential(
    stack_new: &ImageStack,
    past_phases: &PhaseRaster,
    stack_past: &ImageStack,
    spec: &PluginSpec,
    distance: Distance,
    win: usize,
    cfg: &MMConfig,
) -> Result<PhaseRaster> {
    check_pipeline(win, cfg)?;
    if past_phases.count != stack_past.l {
        return Err(Error::dims(format!(
            "{} past phases for a past stack of {} images",
            past_phases.count, stack_past.l
        )));
    }
    if (past_phases.height, past_phases.width) != (stack_past.height, stack_past.width) {
        return Err(Error::dims(format!(
            "past phase raster {}x{} with stack {}x{}",
            past_phases.height, past_phases.width, stack_past.height, stack_past.width
        )));
    }
    let full = stack_past.concat(stack_new)?;
    let k = stack_new.l;
    run_pixels(full.height, full.width, k, |r, c| {
        let undersampled = window_size(full.height, full.width, r, c, win) < full.l;
        let angles = past_phases.phases_at(r, c).and_then(|w_past| {
            let (sigma, _) = pixel_plugin(&full, r, c, win, spec)?;
            solve_sequential(distance, &sigma, &w_past, cfg).ok().map(|s| s.phases.angles())
        });
        PixelOutcome { angles, undersampled }
    })
}

/// Wrapped phase difference `θᵢ − θⱼ` per pixel, row-major; NaN where masked.
pub fn interferogram(phases: &PhaseRaster, i: usize, j: usize) -> Result<Vec<f64>> {
    if i >= phases.count || j >= phases.count {
        return Err(Error::OutOfRange(format!("dates ({i}, {j}) with {} phases", phases.count)));
    }
    Ok((0..phases.height * phases.width)
        .map(|p| {
            if phases.mask[p] {
                f64::NAN
            } else {
                let a = &phases.data[p * phases.count..(p + 1) * phases.count];
                wrap_angle(a[i] - a[j])
            }
        })
        .collect())
}

/// A stack whose sample covariance over every full `win × win` window equals
/// `sigma` exactly.
///
/// Pixel `(r, c)` holds `L u(r, c)` with `L Lᴴ = Σ` and
/// `u_j(r, c) = exp(2πi (a r + b c) / win)`, `j = a + win·b`. The vectors `u`
/// are orthonormal over any run of `win` consecutive rows and columns.
pub fn noiseless_stack(sigma: &HermitianCov, height: usize, width: usize, win: usize) -> Result<ImageStack> {
    let l = sigma.dim();
    if win == 0 || win * win < l {
        return Err(Error::param(format!("window {win} too small for {l} images")));
    }
    let root = pd_sqrt(sigma.matrix(), DEFAULT_JITTER)?;
    let step = 2.0 * std::f64::consts::PI / win as f64;
    ImageStack::from_pixels(l, height, width, |r, c| {
        let u = CVector::from_fn(l, |j, _| {
            let (a, b) = ((j % win) as f64, (j / win) as f64);
            Complex64::from_polar(1.0, step * (a * r as f64 + b * c as f64))
        });
        &root * u
    })
}
