//! Scale- and translation-invariant Legendre moments and the moment-distance
//! shape prior.
//!
//! A region is given by per-pixel occupancy weights `w` (0/1 for a binary
//! mask, the regularized Heaviside of `-phi` for a level set). Moments are
//! pixel-center sums, centered on the weighted barycenter and normalized by
//! `area^((u+v+2)/2)`.
//!
//! The gradient of the distance with respect to adding unit occupancy at a
//! pixel is
//!
//! ```text
//! G(x) = sum_uv A_uv (H_uv(x) + L_uv(x))
//! A_uv = 2 sum_pq (lam_pq - ref_pq) C_pq a_pu a_qv
//! H_uv = (x - xb)^u (y - yb)^v / |O|^((u+v+2)/2)
//! L_uv = -u M_(u-1)v (x - xb) / |O|^(3/2) - v M_u(v-1) (y - yb) / |O|^(3/2)
//!        - (u+v+2) M_uv / (2 |O|)
//! ```
//!
//! and the descent (outward) speed is `-G`. The `L_uv` above comes from
//! differentiating the barycenter and area normalizations; [`LTerm::Printed`]
//! keeps the alternative `(1 - x)`, `(1 - y)` form for comparison only, it does
//! not agree with finite differences.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::{LevelSetField, Pixel, RegionMask};

pub const MAX_ORDER: usize = 30;
pub const DEFAULT_ORDER: usize = 8;

/// Legendre polynomial coefficients `a[p][k]` up to order `N`.
#[derive(Clone, Debug, PartialEq)]
pub struct LegendreBasis {
    order: usize,
    coeffs: Vec<Vec<f64>>,
}

impl LegendreBasis {
    /// Coefficients by the Bonnet recurrence
    /// `(n+1) P_{n+1} = (2n+1) x P_n - n P_{n-1}`.
    pub fn new(order: usize) -> Result<Self> {
        if order > MAX_ORDER {
            return Err(Error::OrderRange(order));
        }
        let mut coeffs: Vec<Vec<f64>> = vec![vec![1.0]];
        if order >= 1 {
            coeffs.push(vec![0.0, 1.0]);
        }
        for n in 1..order {
            let mut next = vec![0.0; n + 2];
            let nf = n as f64;
            for (k, &c) in coeffs[n].iter().enumerate() {
                next[k + 1] += (2.0 * nf + 1.0) * c;
            }
            for (k, &c) in coeffs[n - 1].iter().enumerate() {
                next[k] -= nf * c;
            }
            for c in &mut next {
                *c /= nf + 1.0;
            }
            coeffs.push(next);
        }
        Ok(Self { order, coeffs })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Coefficient of `x^k` in `P_p` (zero for `k > p`).
    #[inline]
    pub fn a(&self, p: usize, k: usize) -> f64 {
        self.coeffs[p].get(k).copied().unwrap_or(0.0)
    }

    pub fn row(&self, p: usize) -> &[f64] {
        &self.coeffs[p]
    }

    #[inline]
    pub fn c(p: usize, q: usize) -> f64 {
        ((2 * p + 1) * (2 * q + 1)) as f64 / 4.0
    }

    /// `P_p(x)` by Horner on the coefficient row.
    pub fn eval(&self, p: usize, x: f64) -> f64 {
        self.coeffs[p].iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }
}

#[inline]
fn tri_index(order: usize, p: usize, q: usize) -> usize {
    p * (order + 1) + q
}

/// Centered, scale-normalized geometric moments `M_uv`, `u + v <= N`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeometricMoments {
    order: usize,
    area: f64,
    xbar: f64,
    ybar: f64,
    values: Vec<f64>,
}

impl GeometricMoments {
    pub fn from_mask(mask: &RegionMask, order: usize) -> Result<Self> {
        let weights: Vec<f64> = mask
            .data()
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect();
        Self::from_weights(mask.width(), &weights, order)
    }

    pub fn from_levelset(phi: &LevelSetField, order: usize) -> Result<Self> {
        Self::from_weights(phi.width(), &phi.inside_weights(), order)
    }

    /// Moments of a weighted region on a row-major grid of the given width.
    pub fn from_weights(width: usize, weights: &[f64], order: usize) -> Result<Self> {
        if order > MAX_ORDER {
            return Err(Error::OrderRange(order));
        }
        // coordinates relative to the support's bounding-box corner, so that
        // integer translations give bit-identical sums
        let (mut x0, mut y0) = (usize::MAX, usize::MAX);
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                x0 = x0.min(i % width);
                y0 = y0.min(i / width);
            }
        }
        let mut area = 0.0;
        let mut sx = 0.0;
        let mut sy = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                area += w;
                sx += w * (i % width - x0) as f64;
                sy += w * (i / width - y0) as f64;
            }
        }
        if !(area > 0.0) {
            return Err(Error::EmptyRegion("shape moments"));
        }
        let xrel = sx / area;
        let yrel = sy / area;
        let xbar = x0 as f64 + xrel;
        let ybar = y0 as f64 + yrel;
        let n1 = order + 1;
        let mut raw = vec![0.0; n1 * n1];
        let mut xp = vec![0.0; n1];
        let mut yp = vec![0.0; n1];
        for (i, &w) in weights.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            let dx = (i % width - x0) as f64 - xrel;
            let dy = (i / width - y0) as f64 - yrel;
            xp[0] = w;
            yp[0] = 1.0;
            for k in 1..n1 {
                xp[k] = xp[k - 1] * dx;
                yp[k] = yp[k - 1] * dy;
            }
            for u in 0..n1 {
                for v in 0..n1 - u {
                    raw[tri_index(order, u, v)] += xp[u] * yp[v];
                }
            }
        }
        let mut values = vec![0.0; n1 * n1];
        for u in 0..n1 {
            for v in 0..n1 - u {
                let s = (u + v + 2) as f64 / 2.0;
                values[tri_index(order, u, v)] = raw[tri_index(order, u, v)] / area.powf(s);
            }
        }
        // exact normalization of the zeroth moment
        values[0] = 1.0;
        Ok(Self {
            order,
            area,
            xbar,
            ybar,
            values,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn barycenter(&self) -> (f64, f64) {
        (self.xbar, self.ybar)
    }

    /// `M_uv`; zero when `u + v > N`.
    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        if u + v > self.order {
            0.0
        } else {
            self.values[tri_index(self.order, u, v)]
        }
    }

    pub fn legendre(&self, basis: &LegendreBasis) -> Result<MomentVector> {
        if basis.order() != self.order {
            return Err(Error::OrderMismatch(basis.order(), self.order));
        }
        let n = self.order;
        let mut values = vec![0.0; (n + 1) * (n + 1)];
        for p in 0..=n {
            for q in 0..=n - p {
                let mut acc = 0.0;
                for u in 0..=p {
                    let apu = basis.a(p, u);
                    if apu == 0.0 {
                        continue;
                    }
                    for v in 0..=q {
                        acc += apu * basis.a(q, v) * self.get(u, v);
                    }
                }
                values[tri_index(n, p, q)] = LegendreBasis::c(p, q) * acc;
            }
        }
        Ok(MomentVector { order: n, values })
    }
}

/// Truncated invariant Legendre moments `lambda_pq`, `p + q <= N`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentVector {
    order: usize,
    values: Vec<f64>,
}

impl MomentVector {
    pub fn from_mask(mask: &RegionMask, order: usize) -> Result<Self> {
        GeometricMoments::from_mask(mask, order)?.legendre(&LegendreBasis::new(order)?)
    }

    pub fn from_levelset(phi: &LevelSetField, order: usize) -> Result<Self> {
        GeometricMoments::from_levelset(phi, order)?.legendre(&LegendreBasis::new(order)?)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, p: usize, q: usize) -> f64 {
        if p + q > self.order {
            0.0
        } else {
            self.values[tri_index(self.order, p, q)]
        }
    }

    /// `(p, q, lambda_pq)` with `p` ascending, then `q` ascending.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.order;
        (0..=n).flat_map(move |p| (0..=n - p).map(move |q| (p, q, self.get(p, q))))
    }

    pub fn len(&self) -> usize {
        (self.order + 1) * (self.order + 2) / 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Plain-text form: an `order N` header, then one `p q value` line per moment.
    pub fn to_text(&self) -> String {
        let mut s = format!("order {}\n", self.order);
        for (p, q, v) in self.iter() {
            let _ = writeln!(s, "{p} {q} {v:e}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty moment file".into()))?;
        let order: usize = header
            .strip_prefix("order")
            .and_then(|r| r.trim().parse().ok())
            .ok_or_else(|| Error::Format(format!("bad header line {header:?}")))?;
        if order > MAX_ORDER {
            return Err(Error::OrderRange(order));
        }
        let mut values = vec![0.0; (order + 1) * (order + 1)];
        let mut seen = vec![false; values.len()];
        for line in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let parsed = match parts.as_slice() {
                [p, q, v] => p
                    .parse::<usize>()
                    .ok()
                    .zip(q.parse::<usize>().ok())
                    .zip(v.parse::<f64>().ok()),
                _ => None,
            };
            let ((p, q), v) =
                parsed.ok_or_else(|| Error::Format(format!("bad moment line {line:?}")))?;
            if p + q > order {
                return Err(Error::Format(format!(
                    "moment ({p}, {q}) exceeds order {order}"
                )));
            }
            values[tri_index(order, p, q)] = v;
            seen[tri_index(order, p, q)] = true;
        }
        for p in 0..=order {
            for q in 0..=order - p {
                if !seen[tri_index(order, p, q)] {
                    return Err(Error::Format(format!("missing moment ({p}, {q})")));
                }
            }
        }
        Ok(Self { order, values })
    }
}

/// Squared Euclidean distance between two moment vectors.
pub fn shape_distance(lam: &MomentVector, lam_ref: &MomentVector) -> Result<f64> {
    if lam.order != lam_ref.order {
        return Err(Error::OrderMismatch(lam.order, lam_ref.order));
    }
    Ok(lam
        .iter()
        .map(|(p, q, v)| {
            let d = v - lam_ref.get(p, q);
            d * d
        })
        .sum())
}

/// Which `L_uv` expression to assemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LTerm {
    /// Derivative of the barycenter and area normalizations.
    #[default]
    Derived,
    /// The `(1 - x)`, `(1 - y)` variant; kept only for comparison.
    Printed,
}

/// Assembled `A_uv` and normalization terms for fast per-pixel evaluation.
#[derive(Clone, Debug)]
pub struct ShapeGradient {
    order: usize,
    form: LTerm,
    moments: GeometricMoments,
    lam: MomentVector,
    a: Vec<f64>,
    /// `A_uv / |O|^((u+v+2)/2)`
    h_coeff: Vec<f64>,
    c0: f64,
    cx: f64,
    cy: f64,
}

impl ShapeGradient {
    pub fn new(moments: GeometricMoments, lam_ref: &MomentVector, form: LTerm) -> Result<Self> {
        let n = moments.order();
        if lam_ref.order() != n {
            return Err(Error::OrderMismatch(n, lam_ref.order()));
        }
        let basis = LegendreBasis::new(n)?;
        let lam = moments.legendre(&basis)?;
        let n1 = n + 1;
        let mut a = vec![0.0; n1 * n1];
        for p in 0..=n {
            for q in 0..=n - p {
                let r = lam.get(p, q) - lam_ref.get(p, q);
                if r == 0.0 {
                    continue;
                }
                let w = 2.0 * r * LegendreBasis::c(p, q);
                for u in 0..=p {
                    let apu = basis.a(p, u);
                    if apu == 0.0 {
                        continue;
                    }
                    for v in 0..=q {
                        a[tri_index(n, u, v)] += w * apu * basis.a(q, v);
                    }
                }
            }
        }
        let area = moments.area();
        let (xb, yb) = moments.barycenter();
        let mut h_coeff = vec![0.0; n1 * n1];
        let (mut c0, mut cx, mut cy) = (0.0, 0.0, 0.0);
        let a32 = area.powf(1.5);
        for u in 0..=n {
            for v in 0..=n - u {
                let auv = a[tri_index(n, u, v)];
                if auv == 0.0 {
                    continue;
                }
                h_coeff[tri_index(n, u, v)] = auv / area.powf((u + v + 2) as f64 / 2.0);
                c0 -= auv * (u + v + 2) as f64 * moments.get(u, v) / (2.0 * area);
                let mx = if u > 0 {
                    u as f64 * moments.get(u - 1, v) / a32
                } else {
                    0.0
                };
                let my = if v > 0 {
                    v as f64 * moments.get(u, v - 1) / a32
                } else {
                    0.0
                };
                match form {
                    LTerm::Derived => {
                        cx -= auv * mx;
                        cy -= auv * my;
                    }
                    LTerm::Printed => {
                        // u xb M_(u-1)v (1 - x) / |O|^1.5, stored against raw x below
                        cx += auv * mx * xb;
                        cy += auv * my * yb;
                    }
                }
            }
        }
        Ok(Self {
            order: n,
            form,
            moments,
            lam,
            a,
            h_coeff,
            c0,
            cx,
            cy,
        })
    }

    pub fn from_levelset(phi: &LevelSetField, lam_ref: &MomentVector) -> Result<Self> {
        Self::new(
            GeometricMoments::from_levelset(phi, lam_ref.order())?,
            lam_ref,
            LTerm::Derived,
        )
    }

    pub fn from_mask(mask: &RegionMask, lam_ref: &MomentVector) -> Result<Self> {
        Self::new(
            GeometricMoments::from_mask(mask, lam_ref.order())?,
            lam_ref,
            LTerm::Derived,
        )
    }

    pub fn moments(&self) -> &GeometricMoments {
        &self.moments
    }

    pub fn lambda(&self) -> &MomentVector {
        &self.lam
    }

    pub fn a_uv(&self, u: usize, v: usize) -> f64 {
        if u + v > self.order {
            0.0
        } else {
            self.a[tri_index(self.order, u, v)]
        }
    }

    /// Derivative of the moment distance w.r.t. occupancy at `(x, y)`.
    pub fn gradient_at(&self, x: f64, y: f64) -> f64 {
        let n = self.order;
        let (xb, yb) = self.moments.barycenter();
        let dx = x - xb;
        let dy = y - yb;
        let mut acc = self.c0;
        match self.form {
            LTerm::Derived => acc += self.cx * dx + self.cy * dy,
            LTerm::Printed => acc += self.cx * (1.0 - x) + self.cy * (1.0 - y),
        }
        let mut xp = 1.0;
        for u in 0..=n {
            let mut yp = 1.0;
            for v in 0..=n - u {
                acc += self.h_coeff[tri_index(n, u, v)] * xp * yp;
                yp *= dy;
            }
            xp *= dx;
        }
        acc
    }

    /// Outward descent speed `-G`.
    #[inline]
    pub fn speed_at(&self, x: usize, y: usize) -> f64 {
        -self.gradient_at(x as f64, y as f64)
    }
}

/// Descent speed of the moment distance evaluated on a band around the contour.
#[derive(Clone, Debug)]
pub struct ShapeSpeedField {
    width: usize,
    speed: Vec<f64>,
    band: Vec<usize>,
    max_abs: f64,
}

impl ShapeSpeedField {
    /// Speeds for pixels with `|phi| <= band_width`; zero elsewhere.
    pub fn on_band(gradient: &ShapeGradient, phi: &LevelSetField, band_width: f64) -> Self {
        let w = phi.width();
        let mut speed = vec![0.0; phi.values().len()];
        let mut band = Vec::new();
        let mut max_abs: f64 = 0.0;
        for (i, &v) in phi.values().iter().enumerate() {
            if v.abs() <= band_width {
                let s = gradient.speed_at(i % w, i / w);
                speed[i] = s;
                max_abs = max_abs.max(s.abs());
                band.push(i);
            }
        }
        Self {
            width: w,
            speed,
            band,
            max_abs,
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.speed[y * self.width + x]
    }

    pub fn values(&self) -> &[f64] {
        &self.speed
    }

    pub fn band(&self) -> &[usize] {
        &self.band
    }

    pub fn max_abs(&self) -> f64 {
        self.max_abs
    }
}

pub fn legendre_coeffs(order: usize) -> Result<LegendreBasis> {
    LegendreBasis::new(order)
}

pub fn geometric_moments(mask: &RegionMask, order: usize) -> Result<GeometricMoments> {
    GeometricMoments::from_mask(mask, order)
}

pub fn legendre_moments(mask: &RegionMask, order: usize) -> Result<MomentVector> {
    MomentVector::from_mask(mask, order)
}

/// Outward descent speed of `d(mask, ref)` at one pixel.
pub fn shape_speed(mask: &RegionMask, lam_ref: &MomentVector, pixel: Pixel) -> Result<f64> {
    Ok(ShapeGradient::from_mask(mask, lam_ref)?.speed_at(pixel.x, pixel.y))
}
