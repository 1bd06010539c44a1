//! Discrete geometry substrate: images, region masks and level-set fields.
//!
//! Pixels are addressed as `(x, y)` with `x` the column and `y` the row;
//! storage is row-major. Level sets follow the inside-negative convention:
//! `phi < 0` inside the region, `phi >= 0` outside. Every speed in this crate
//! is an *outward* normal speed `F`, applied as `phi <- phi - dt * F * |grad phi|`.

use crate::error::{Error, Result};

/// Gradient-norm guard below which curvature is reported as zero.
pub const GRAD_EPS: f64 = 1e-8;

/// Half-width (in pixels) of the regularized Heaviside and delta functions.
pub const SMOOTH_WIDTH: f64 = 2.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pixel {
    pub x: usize,
    pub y: usize,
}

impl Pixel {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 || width * height != len {
        return Err(Error::Dimensions { width, height, len });
    }
    Ok(())
}

/// Observed scalar intensities.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageGrid {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImageGrid {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                x: i % width,
                y: i / width,
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let data = (0..width * height)
            .map(|i| f(i % width, i / width))
            .collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Binary membership of the region Omega; `true` = inside.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RegionMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl RegionMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Result<Self> {
        let data = (0..width * height)
            .map(|i| f(i % width, i / width))
            .collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, inside: bool) {
        self.data[y * self.width + x] = inside;
    }

    pub fn area(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_uniform(&self) -> bool {
        let first = self.data[0];
        self.data.iter().all(|&b| b == first)
    }

    pub fn complement(&self) -> RegionMask {
        RegionMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|b| !b).collect(),
        }
    }

    /// Translate by an integer vector; pixels shifted off the grid are dropped.
    pub fn shifted(&self, dx: isize, dy: isize) -> RegionMask {
        let (w, h) = (self.width as isize, self.height as isize);
        let mut out = vec![false; self.data.len()];
        for y in 0..h {
            for x in 0..w {
                let (sx, sy) = (x - dx, y - dy);
                if sx >= 0 && sy >= 0 && sx < w && sy < h {
                    out[(y * w + x) as usize] = self.data[(sy * w + sx) as usize];
                }
            }
        }
        RegionMask {
            width: self.width,
            height: self.height,
            data: out,
        }
    }

    pub fn same_size(&self, other: &RegionMask) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::SizeMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    /// Inside pixels with at least one in-grid outside 4-neighbour, in raster order.
    pub fn boundary_pixels(&self) -> Vec<Pixel> {
        let (w, h) = (self.width, self.height);
        let mut out = Vec::new();
        for y in 0..h {
            for x in 0..w {
                if !self.get(x, y) {
                    continue;
                }
                let outside = (x > 0 && !self.get(x - 1, y))
                    || (x + 1 < w && !self.get(x + 1, y))
                    || (y > 0 && !self.get(x, y - 1))
                    || (y + 1 < h && !self.get(x, y + 1));
                if outside {
                    out.push(Pixel::new(x, y));
                }
            }
        }
        out
    }
}

/// Localized normal displacement used by the finite-difference oracles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryPerturbation {
    pub center: Pixel,
    pub radius: f64,
    pub amplitude: f64,
}

impl BoundaryPerturbation {
    pub fn new(center: Pixel, radius: f64, amplitude: f64) -> Result<Self> {
        if !(radius >= 1.0) || !amplitude.is_finite() {
            return Err(Error::InvalidParam(format!(
                "perturbation radius {radius} must be >= 1 and amplitude {amplitude} finite"
            )));
        }
        Ok(Self {
            center,
            radius,
            amplitude,
        })
    }

    /// Smooth compactly supported weight, 1 at the center, 0 beyond `radius`.
    pub fn bump(&self, x: usize, y: usize) -> f64 {
        let dx = x as f64 - self.center.x as f64;
        let dy = y as f64 - self.center.y as f64;
        let t = (dx * dx + dy * dy) / (self.radius * self.radius);
        if t >= 1.0 {
            0.0
        } else {
            (1.0 - t) * (1.0 - t)
        }
    }
}

/// Regularized Heaviside `H(z)`, equal to 1 for `z >= SMOOTH_WIDTH`.
pub fn smooth_heaviside(z: f64) -> f64 {
    let e = SMOOTH_WIDTH;
    if z <= -e {
        0.0
    } else if z >= e {
        1.0
    } else {
        0.5 * (1.0 + z / e + (std::f64::consts::PI * z / e).sin() / std::f64::consts::PI)
    }
}

/// Derivative of [`smooth_heaviside`].
pub fn smooth_delta(z: f64) -> f64 {
    let e = SMOOTH_WIDTH;
    if z.abs() >= e {
        0.0
    } else {
        0.5 / e * (1.0 + (std::f64::consts::PI * z / e).cos())
    }
}

/// Signed embedding of the contour.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSetField {
    width: usize,
    height: usize,
    phi: Vec<f64>,
}

impl LevelSetField {
    pub fn new(width: usize, height: usize, phi: Vec<f64>) -> Result<Self> {
        check_dims(width, height, phi.len())?;
        if let Some(i) = phi.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                x: i % width,
                y: i / width,
            });
        }
        Ok(Self { width, height, phi })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let phi = (0..width * height)
            .map(|i| f(i % width, i / width))
            .collect();
        Self::new(width, height, phi)
    }

    /// Signed distance to the boundary of `mask`, interface halfway between
    /// inside and outside pixel centers.
    pub fn from_mask(mask: &RegionMask) -> Result<Self> {
        let phi = mask
            .data()
            .iter()
            .map(|&b| if b { -1.0 } else { 1.0 })
            .collect();
        Self::new(mask.width(), mask.height(), phi)?.reinitialize()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.phi
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.phi
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.phi[y * self.width + x]
    }

    #[inline]
    fn at(&self, x: isize, y: isize) -> f64 {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.phi[cy * self.width + cx]
    }

    pub fn mask(&self) -> RegionMask {
        RegionMask {
            width: self.width,
            height: self.height,
            data: self.phi.iter().map(|&v| v < 0.0).collect(),
        }
    }

    /// Soft inside-occupancy `H(-phi)` per pixel.
    pub fn inside_weights(&self) -> Vec<f64> {
        self.phi.iter().map(|&v| smooth_heaviside(-v)).collect()
    }

    /// Central-difference gradient, one-sided on the grid border.
    pub fn gradient(&self, x: usize, y: usize) -> (f64, f64) {
        let gx = if self.width == 1 {
            0.0
        } else if x == 0 {
            self.get(1, y) - self.get(0, y)
        } else if x + 1 == self.width {
            self.get(x, y) - self.get(x - 1, y)
        } else {
            0.5 * (self.get(x + 1, y) - self.get(x - 1, y))
        };
        let gy = if self.height == 1 {
            0.0
        } else if y == 0 {
            self.get(x, 1) - self.get(x, 0)
        } else if y + 1 == self.height {
            self.get(x, y) - self.get(x, y - 1)
        } else {
            0.5 * (self.get(x, y + 1) - self.get(x, y - 1))
        };
        (gx, gy)
    }

    pub fn gradient_norm(&self, x: usize, y: usize) -> f64 {
        let (gx, gy) = self.gradient(x, y);
        gx.hypot(gy)
    }

    /// Godunov upwind `|grad phi|` for an outward speed of the given sign.
    pub fn upwind_gradient_norm(&self, x: usize, y: usize, speed: f64) -> f64 {
        let c = self.get(x, y);
        let (xi, yi) = (x as isize, y as isize);
        let dxm = if x > 0 { c - self.at(xi - 1, yi) } else { 0.0 };
        let dxp = if x + 1 < self.width {
            self.at(xi + 1, yi) - c
        } else {
            0.0
        };
        let dym = if y > 0 { c - self.at(xi, yi - 1) } else { 0.0 };
        let dyp = if y + 1 < self.height {
            self.at(xi, yi + 1) - c
        } else {
            0.0
        };
        let sq = |v: f64| v * v;
        if speed > 0.0 {
            (sq(dxm.max(0.0)) + sq(dxp.min(0.0)) + sq(dym.max(0.0)) + sq(dyp.min(0.0))).sqrt()
        } else {
            (sq(dxm.min(0.0)) + sq(dxp.max(0.0)) + sq(dym.min(0.0)) + sq(dyp.max(0.0))).sqrt()
        }
    }

    /// Mean curvature `div(grad phi / |grad phi|)` of the level line through
    /// the pixel; positive on the boundary of a convex inside region.
    pub fn curvature(&self, x: usize, y: usize) -> f64 {
        let (xi, yi) = (x as isize, y as isize);
        let c = self.get(x, y);
        let px = 0.5 * (self.at(xi + 1, yi) - self.at(xi - 1, yi));
        let py = 0.5 * (self.at(xi, yi + 1) - self.at(xi, yi - 1));
        let norm2 = px * px + py * py;
        if norm2.sqrt() < GRAD_EPS {
            return 0.0;
        }
        let pxx = self.at(xi + 1, yi) - 2.0 * c + self.at(xi - 1, yi);
        let pyy = self.at(xi, yi + 1) - 2.0 * c + self.at(xi, yi - 1);
        let pxy = 0.25
            * (self.at(xi + 1, yi + 1) - self.at(xi + 1, yi - 1) - self.at(xi - 1, yi + 1)
                + self.at(xi - 1, yi - 1));
        (pxx * py * py - 2.0 * px * py * pxy + pyy * px * px) / (norm2 * norm2.sqrt())
    }

    /// Smoothed-delta line integral `sum delta(phi) |grad phi|`.
    pub fn contour_length(&self) -> f64 {
        let mut total = 0.0;
        for y in 0..self.height {
            for x in 0..self.width {
                let d = smooth_delta(self.get(x, y));
                if d > 0.0 {
                    total += d * self.gradient_norm(x, y);
                }
            }
        }
        total
    }

    /// `phi - amplitude * bump`: moves the zero level outward where amplitude > 0.
    pub fn apply_perturbation(&self, v: &BoundaryPerturbation) -> LevelSetField {
        let mut out = self.clone();
        if v.amplitude == 0.0 {
            return out;
        }
        let r = v.radius.ceil() as usize;
        let x0 = v.center.x.saturating_sub(r);
        let y0 = v.center.y.saturating_sub(r);
        let x1 = (v.center.x + r).min(self.width - 1);
        let y1 = (v.center.y + r).min(self.height - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let b = v.bump(x, y);
                if b > 0.0 {
                    out.phi[y * self.width + x] -= v.amplitude * b;
                }
            }
        }
        out
    }

    /// Rebuild `phi` as a signed distance to its current zero crossing.
    ///
    /// Pixels adjacent to a sign change get their distance from the linearly
    /// interpolated crossings; the rest is filled by fast sweeping of the
    /// eikonal equation. The sign of every pixel is preserved, so the mask is
    /// unchanged.
    pub fn reinitialize(&self) -> Result<LevelSetField> {
        let (w, h) = (self.width, self.height);
        let inside: Vec<bool> = self.phi.iter().map(|&v| v < 0.0).collect();
        if inside.iter().all(|&b| b == inside[0]) {
            return Err(Error::ContourVanished);
        }
        let mut dist = vec![f64::INFINITY; w * h];
        let mut frozen = vec![false; w * h];
        let crossing = |i: usize, j: usize| -> Option<f64> {
            if inside[i] == inside[j] {
                return None;
            }
            let (a, b) = (self.phi[i].abs(), self.phi[j].abs());
            Some(if a + b > 0.0 { a / (a + b) } else { 0.0 })
        };
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let mut dx = f64::INFINITY;
                let mut dy = f64::INFINITY;
                if x > 0 {
                    if let Some(t) = crossing(i, i - 1) {
                        dx = dx.min(t);
                    }
                }
                if x + 1 < w {
                    if let Some(t) = crossing(i, i + 1) {
                        dx = dx.min(t);
                    }
                }
                if y > 0 {
                    if let Some(t) = crossing(i, i - w) {
                        dy = dy.min(t);
                    }
                }
                if y + 1 < h {
                    if let Some(t) = crossing(i, i + w) {
                        dy = dy.min(t);
                    }
                }
                let d = match (dx.is_finite(), dy.is_finite()) {
                    (true, true) => {
                        let n = dx.hypot(dy);
                        if n > 0.0 {
                            dx * dy / n
                        } else {
                            0.0
                        }
                    }
                    (true, false) => dx,
                    (false, true) => dy,
                    (false, false) => continue,
                };
                dist[i] = d;
                frozen[i] = true;
            }
        }
        fast_sweep(&mut dist, &frozen, w, h);
        let phi = dist
            .iter()
            .zip(&inside)
            .map(|(&d, &ins)| if ins { -d } else { d })
            .collect();
        Ok(LevelSetField {
            width: w,
            height: h,
            phi,
        })
    }
}

fn fast_sweep(dist: &mut [f64], frozen: &[bool], w: usize, h: usize) {
    let update = |dist: &mut [f64], x: usize, y: usize| {
        let i = y * w + x;
        if frozen[i] {
            return;
        }
        let left = if x > 0 { dist[i - 1] } else { f64::INFINITY };
        let right = if x + 1 < w {
            dist[i + 1]
        } else {
            f64::INFINITY
        };
        let up = if y > 0 { dist[i - w] } else { f64::INFINITY };
        let down = if y + 1 < h {
            dist[i + w]
        } else {
            f64::INFINITY
        };
        let a = left.min(right);
        let b = up.min(down);
        if !a.is_finite() && !b.is_finite() {
            return;
        }
        let cand = if (a - b).abs() >= 1.0 {
            a.min(b) + 1.0
        } else {
            0.5 * (a + b + (2.0 - (a - b) * (a - b)).sqrt())
        };
        if cand < dist[i] {
            dist[i] = cand;
        }
    };
    for _ in 0..2 {
        for y in 0..h {
            for x in 0..w {
                update(dist, x, y);
            }
        }
        for y in 0..h {
            for x in (0..w).rev() {
                update(dist, x, y);
            }
        }
        for y in (0..h).rev() {
            for x in (0..w).rev() {
                update(dist, x, y);
            }
        }
        for y in (0..h).rev() {
            for x in 0..w {
                update(dist, x, y);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk_sdf(n: usize, cx: f64, cy: f64, r: f64) -> LevelSetField {
        LevelSetField::from_fn(n, n, |x, y| (x as f64 - cx).hypot(y as f64 - cy) - r).unwrap()
    }

    #[test]
    fn sign_convention() {
        let inside = LevelSetField::new(4, 3, vec![-1.0; 12]).unwrap();
        assert_eq!(inside.mask().area(), 12);
        let outside = LevelSetField::new(4, 3, vec![1.0; 12]).unwrap();
        assert_eq!(outside.mask().area(), 0);
    }

    #[test]
    fn disk_mask_area_matches_raster_count() {
        let phi = disk_sdf(64, 32.0, 32.0, 10.0);
        // independent count of pixel centers strictly inside the circle
        let mut count = 0usize;
        for y in 0..64 {
            for x in 0..64 {
                let d2 = (x as f64 - 32.0).powi(2) + (y as f64 - 32.0).powi(2);
                if d2 < 100.0 {
                    count += 1;
                }
            }
        }
        let area = phi.mask().area();
        assert_eq!(area, count);
        let expected = std::f64::consts::PI * 100.0;
        assert!((area as f64 - expected).abs() <= 0.05 * expected);
    }

    #[test]
    fn rejects_bad_dimensions_and_nan() {
        assert!(ImageGrid::new(0, 3, vec![]).is_err());
        assert!(ImageGrid::new(2, 2, vec![0.0; 3]).is_err());
        assert!(matches!(
            ImageGrid::new(2, 1, vec![0.0, f64::NAN]),
            Err(Error::NonFinite { x: 1, y: 0 })
        ));
    }

    #[test]
    fn reinitialize_fixed_point_on_signed_distance() {
        let phi = disk_sdf(48, 23.3, 24.6, 12.0);
        let re = phi.reinitialize().unwrap();
        assert_eq!(re.mask(), phi.mask());
        let line = LevelSetField::from_fn(20, 10, |x, _| x as f64 - 9.3).unwrap();
        let re = line.reinitialize().unwrap();
        for (a, b) in re.values().iter().zip(line.values()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn reinitialize_scaled_distance_restores_unit_gradient() {
        let base = disk_sdf(64, 31.5, 32.2, 15.0);
        let scaled =
            LevelSetField::new(64, 64, base.values().iter().map(|v| 3.0 * v).collect()).unwrap();
        let re = scaled.reinitialize().unwrap();
        assert_eq!(re.mask(), scaled.mask());
        for y in 2..62 {
            for x in 2..62 {
                if re.get(x, y).abs() < 3.0 {
                    let g = re.gradient_norm(x, y);
                    assert!((g - 1.0).abs() <= 0.1, "|grad| = {g} at ({x},{y})");
                }
            }
        }
    }

    #[test]
    fn reinitialize_uniform_sign_errors() {
        let phi = LevelSetField::new(5, 5, vec![1.0; 25]).unwrap();
        assert!(matches!(phi.reinitialize(), Err(Error::ContourVanished)));
    }

    #[test]
    fn curvature_of_flat_edge_is_zero() {
        let phi = LevelSetField::from_fn(32, 32, |x, _| x as f64 - 15.5).unwrap();
        for y in 0..32 {
            assert!(phi.curvature(15, y).abs() < 0.05);
        }
    }

    #[test]
    fn curvature_of_disk_boundary() {
        let phi = disk_sdf(64, 32.0, 32.0, 20.0);
        let k = phi.curvature(52, 32);
        assert!((k - 0.05).abs() <= 0.2 * 0.05, "kappa = {k}");
        // flat field guard
        let flat = LevelSetField::new(4, 4, vec![2.0; 16]).unwrap();
        assert_eq!(flat.curvature(1, 1), 0.0);
    }

    #[test]
    fn curvature_converges_with_resolution() {
        let mean_err = |scale: f64| {
            let n = (64.0 * scale) as usize;
            let c = n as f64 / 2.0 + 0.3;
            let r = 8.0 * scale;
            let phi = disk_sdf(n, c, c, r);
            let mut err = 0.0;
            let mut count = 0.0;
            for y in 0..n {
                for x in 0..n {
                    let rho = (x as f64 - c).hypot(y as f64 - c);
                    if (rho - r).abs() < 1.0 {
                        // compare the dimensionless curvature rho * kappa against 1
                        err += (phi.curvature(x, y) * rho - 1.0).abs();
                        count += 1.0;
                    }
                }
            }
            err / count
        };
        let coarse = mean_err(1.0);
        let fine = mean_err(2.0);
        assert!(fine <= 0.5 * coarse + 1e-12, "coarse {coarse} fine {fine}");
    }

    #[test]
    fn boundary_pixels_cases() {
        assert!(RegionMask::empty(5, 5)
            .unwrap()
            .boundary_pixels()
            .is_empty());
        let full = RegionMask::new(3, 3, vec![true; 9]).unwrap();
        assert!(full.boundary_pixels().is_empty());
        let mut single = RegionMask::empty(5, 5).unwrap();
        single.set(2, 3, true);
        assert_eq!(single.boundary_pixels(), vec![Pixel::new(2, 3)]);
        let square =
            RegionMask::from_fn(5, 5, |x, y| (1..=3).contains(&x) && (1..=3).contains(&y)).unwrap();
        let b = square.boundary_pixels();
        let expected: Vec<Pixel> = (1..=3)
            .flat_map(|y| (1..=3).map(move |x| Pixel::new(x, y)))
            .filter(|p| !(p.x == 2 && p.y == 2))
            .collect();
        assert_eq!(b, expected);
    }

    #[test]
    fn perturbation_cases() {
        let phi = disk_sdf(40, 20.0, 20.0, 8.0);
        let zero = BoundaryPerturbation::new(Pixel::new(28, 20), 3.0, 0.0).unwrap();
        assert_eq!(phi.apply_perturbation(&zero), phi);
        let up = BoundaryPerturbation::new(Pixel::new(28, 20), 3.0, 0.8).unwrap();
        let grown = phi.apply_perturbation(&up);
        assert!(grown.mask().area() > phi.mask().area());
        let down = BoundaryPerturbation {
            amplitude: -0.8,
            ..up
        };
        let back = grown.apply_perturbation(&down);
        for (a, b) in back.values().iter().zip(phi.values()) {
            assert!((a - b).abs() <= 1e-12);
        }
        assert!(BoundaryPerturbation::new(Pixel::new(0, 0), 0.5, 1.0).is_err());
    }

    #[test]
    fn contour_length_of_square() {
        let mask = RegionMask::from_fn(30, 30, |x, y| {
            (10..20).contains(&x) && (10..20).contains(&y)
        })
        .unwrap();
        let phi = LevelSetField::from_mask(&mask).unwrap();
        let len = phi.contour_length();
        assert!((len - 40.0).abs() <= 0.15 * 40.0, "length {len}");
    }

    #[test]
    fn smooth_heaviside_is_consistent_with_delta() {
        for i in -20..=20 {
            let z = i as f64 * 0.1;
            let h = 1e-6;
            let fd = (smooth_heaviside(z + h) - smooth_heaviside(z - h)) / (2.0 * h);
            assert!((fd - smooth_delta(z)).abs() < 1e-6);
        }
    }
}
