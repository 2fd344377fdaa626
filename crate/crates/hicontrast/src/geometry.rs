//! Boundary curves: disks, Fourier-perturbed disks and the right-angled
//! isosceles triangle, with their radial profiles.

use num_complex::Complex64;
use std::collections::BTreeMap;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("radial profile is not positive (min r = {0}); the curve would self-intersect")]
    SelfIntersecting(f64),
    #[error("curve is not star-shaped about a known centre")]
    NotStarShaped,
    #[error("Fourier coefficients are not conjugate-symmetric at k = {0}")]
    NotReal(i32),
    #[error("invalid geometry parameter: {0}")]
    Invalid(&'static str),
}

/// Analytic description kept alongside the samples so the radial map can be
/// evaluated exactly.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Disk { radius: f64 },
    Fourier(FourierPerturbation),
    Polygon { vertices: Vec<[f64; 2]> },
}

/// A discretised closed curve, traversed counter-clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCurve {
    pub nodes: Vec<[f64; 2]>,
    /// Outward unit normals.
    pub normals: Vec<[f64; 2]>,
    /// Arclength quadrature weights.
    pub weights: Vec<f64>,
    /// Signed curvature at the nodes (positive for convex arcs).
    pub curvature: Vec<f64>,
    pub total_length: f64,
    pub star_center: Option<[f64; 2]>,
    pub shape: Shape,
}

/// Radial perturbation `r(θ) = R + δ h(θ)` with `h = Σ_k coeffs[k] e^{ikθ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierPerturbation {
    pub radius: f64,
    pub coeffs: BTreeMap<i32, Complex64>,
    pub delta: f64,
}

impl FourierPerturbation {
    pub fn new(radius: f64, coeffs: BTreeMap<i32, Complex64>, delta: f64) -> Self {
        Self { radius, coeffs, delta }
    }

    /// Real cosine series `h = Σ amp_k cos(kθ)`.
    pub fn from_cosines(radius: f64, modes: &[(i32, f64)], delta: f64) -> Self {
        let mut coeffs = BTreeMap::new();
        for &(k, a) in modes {
            if k == 0 {
                *coeffs.entry(0).or_insert(Complex64::new(0.0, 0.0)) += a;
            } else {
                *coeffs.entry(k).or_insert(Complex64::new(0.0, 0.0)) += 0.5 * a;
                *coeffs.entry(-k).or_insert(Complex64::new(0.0, 0.0)) += 0.5 * a;
            }
        }
        Self { radius, coeffs, delta }
    }

    /// Three-petal flower `r = 0.3(1 + δ cos 3θ + 2δ cos 6θ + 4δ cos 9θ)`.
    pub fn flower(delta: f64) -> Self {
        Self::from_cosines(0.3, &[(3, 0.3), (6, 0.6), (9, 1.2)], delta)
    }

    pub fn check(&self) -> Result<(), GeometryError> {
        if !(self.radius > 0.0) || !self.delta.is_finite() {
            return Err(GeometryError::Invalid("radius must be positive and delta finite"));
        }
        for (&k, c) in &self.coeffs {
            let partner = self.coeffs.get(&-k).copied().unwrap_or_default();
            if (partner - c.conj()).norm() > 1e-12 * (1.0 + c.norm()) {
                return Err(GeometryError::NotReal(k));
            }
        }
        let bound: f64 = self.coeffs.values().map(|c| c.norm()).sum::<f64>() * self.delta.abs();
        if bound >= self.radius {
            let min = (0..4096).map(|j| self.r(2.0 * PI * j as f64 / 4096.0)).fold(f64::INFINITY, f64::min);
            if min <= 0.0 {
                return Err(GeometryError::SelfIntersecting(min));
            }
        }
        Ok(())
    }

    /// `δ h(θ)` and its first two θ-derivatives.
    fn dh(&self, theta: f64) -> (f64, f64, f64) {
        let (mut h, mut d1, mut d2) = (0.0, 0.0, 0.0);
        for (&k, c) in &self.coeffs {
            let e = Complex64::from_polar(1.0, k as f64 * theta) * c;
            let kf = k as f64;
            h += e.re;
            d1 += (Complex64::new(0.0, kf) * e).re;
            d2 -= kf * kf * e.re;
        }
        (self.delta * h, self.delta * d1, self.delta * d2)
    }

    pub fn r(&self, theta: f64) -> f64 {
        self.radius + self.dh(theta).0
    }

    /// Coefficient of `e^{ikθ}` in `δ h`.
    pub fn mode(&self, k: i32) -> Complex64 {
        self.coeffs.get(&k).copied().unwrap_or_default() * self.delta
    }
}

/// Equispaced disk of radius `r` centred at the origin.
pub fn make_disk(r: f64, n_nodes: usize) -> BoundaryCurve {
    assert!(r > 0.0 && n_nodes >= 16, "make_disk needs R > 0 and at least 16 nodes");
    let w = 2.0 * PI * r / n_nodes as f64;
    let mut nodes = Vec::with_capacity(n_nodes);
    let mut normals = Vec::with_capacity(n_nodes);
    for j in 0..n_nodes {
        let t = 2.0 * PI * j as f64 / n_nodes as f64;
        let (s, c) = t.sin_cos();
        nodes.push([r * c, r * s]);
        normals.push([c, s]);
    }
    BoundaryCurve {
        nodes,
        normals,
        weights: vec![w; n_nodes],
        curvature: vec![1.0 / r; n_nodes],
        total_length: 2.0 * PI * r,
        star_center: Some([0.0, 0.0]),
        shape: Shape::Disk { radius: r },
    }
}

/// Star-shaped curve `r(θ) = R + δ h(θ)` sampled at equispaced angles.
pub fn make_fourier_domain(pert: &FourierPerturbation, n_nodes: usize) -> Result<BoundaryCurve, GeometryError> {
    pert.check()?;
    if n_nodes < 16 {
        return Err(GeometryError::Invalid("need at least 16 nodes"));
    }
    let dt = 2.0 * PI / n_nodes as f64;
    let mut nodes = Vec::with_capacity(n_nodes);
    let mut normals = Vec::with_capacity(n_nodes);
    let mut weights = Vec::with_capacity(n_nodes);
    let mut curvature = Vec::with_capacity(n_nodes);
    for j in 0..n_nodes {
        let t = dt * j as f64;
        let (s, c) = t.sin_cos();
        let (h, h1, h2) = pert.dh(t);
        let r = pert.radius + h;
        if r <= 0.0 {
            return Err(GeometryError::SelfIntersecting(r));
        }
        let x = [r * c, r * s];
        let d1 = [h1 * c - r * s, h1 * s + r * c];
        let d2 = [h2 * c - 2.0 * h1 * s - r * c, h2 * s + 2.0 * h1 * c - r * s];
        let speed = d1[0].hypot(d1[1]);
        nodes.push(x);
        normals.push([d1[1] / speed, -d1[0] / speed]);
        weights.push(speed * dt);
        curvature.push((d1[0] * d2[1] - d1[1] * d2[0]) / speed.powi(3));
    }
    let total_length = weights.iter().sum();
    Ok(BoundaryCurve {
        nodes,
        normals,
        weights,
        curvature,
        total_length,
        star_center: Some([0.0, 0.0]),
        shape: Shape::Fourier(pert.clone()),
    })
}

/// Vertices of the right-angled isosceles triangle with legs `l`, centroid at
/// the origin and the right angle at the first vertex.
pub fn triangle_vertices(l: f64) -> Vec<[f64; 2]> {
    vec![[-l / 3.0, -l / 3.0], [2.0 * l / 3.0, -l / 3.0], [-l / 3.0, 2.0 * l / 3.0]]
}

/// Right-angled isosceles triangle with midpoint-rule nodes on each edge
/// (no node sits on a vertex).
pub fn make_triangle(l: f64, n_nodes_per_unit: f64) -> BoundaryCurve {
    assert!(l > 0.0 && n_nodes_per_unit > 0.0, "make_triangle needs positive legs and density");
    make_polygon(&triangle_vertices(l), n_nodes_per_unit)
}

/// Triangle with about `n_total` boundary nodes.
pub fn make_triangle_with_nodes(l: f64, n_total: usize) -> BoundaryCurve {
    let perimeter = l * (2.0 + 2f64.sqrt());
    make_triangle(l, n_total as f64 / perimeter)
}

/// Convex polygon (counter-clockwise vertices) with equispaced midpoint nodes.
pub fn make_polygon(vertices: &[[f64; 2]], n_nodes_per_unit: f64) -> BoundaryCurve {
    let nv = vertices.len();
    let mut nodes = Vec::new();
    let mut normals = Vec::new();
    let mut weights = Vec::new();
    for i in 0..nv {
        let a = vertices[i];
        let b = vertices[(i + 1) % nv];
        let d = [b[0] - a[0], b[1] - a[1]];
        let len = d[0].hypot(d[1]);
        let n_e = ((len * n_nodes_per_unit).round() as usize).max(2);
        let w = len / n_e as f64;
        let nu = [d[1] / len, -d[0] / len];
        for j in 0..n_e {
            let s = (j as f64 + 0.5) / n_e as f64;
            nodes.push([a[0] + s * d[0], a[1] + s * d[1]]);
            normals.push(nu);
            weights.push(w);
        }
    }
    let n = nodes.len();
    let total_length = weights.iter().sum();
    BoundaryCurve {
        nodes,
        normals,
        weights,
        curvature: vec![0.0; n],
        total_length,
        star_center: Some([0.0, 0.0]),
        shape: Shape::Polygon { vertices: vertices.to_vec() },
    }
}

impl BoundaryCurve {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Exact radial map `θ ↦ r(θ)` about the star centre.
    pub fn radius_at(&self, theta: f64) -> Result<f64, GeometryError> {
        let c = self.star_center.ok_or(GeometryError::NotStarShaped)?;
        match &self.shape {
            Shape::Disk { radius } => Ok(*radius),
            Shape::Fourier(p) => Ok(p.r(theta)),
            Shape::Polygon { vertices } => {
                let dir = [theta.cos(), theta.sin()];
                let nv = vertices.len();
                let mut best: Option<f64> = None;
                for i in 0..nv {
                    let a = [vertices[i][0] - c[0], vertices[i][1] - c[1]];
                    let b = [vertices[(i + 1) % nv][0] - c[0], vertices[(i + 1) % nv][1] - c[1]];
                    let e = [b[0] - a[0], b[1] - a[1]];
                    let den = dir[0] * e[1] - dir[1] * e[0];
                    if den.abs() < 1e-300 {
                        continue;
                    }
                    let t = (a[0] * e[1] - a[1] * e[0]) / den;
                    let s = (a[0] * dir[1] - a[1] * dir[0]) / den;
                    if t > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&s) {
                        best = Some(best.map_or(t, |v: f64| v.min(t)));
                    }
                }
                best.ok_or(GeometryError::NotStarShaped)
            }
        }
    }

    /// Whether `p` lies inside the curve.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let Some(c) = self.star_center else { return false };
        let d = [p[0] - c[0], p[1] - c[1]];
        let rho = d[0].hypot(d[1]);
        if rho == 0.0 {
            return true;
        }
        match self.radius_at(d[1].atan2(d[0])) {
            Ok(r) => rho < r,
            Err(_) => false,
        }
    }

    /// Polar angle of each node about the origin.
    pub fn angles(&self) -> Vec<f64> {
        self.nodes.iter().map(|x| x[1].atan2(x[0])).collect()
    }

    /// Area from the discrete divergence theorem, `½∮ x·ν ds`.
    pub fn divergence_area(&self) -> f64 {
        0.5 * self
            .nodes
            .iter()
            .zip(&self.normals)
            .zip(&self.weights)
            .map(|((x, n), w)| (x[0] * n[0] + x[1] * n[1]) * w)
            .sum::<f64>()
    }

    /// Exact enclosed area of the analytic shape.
    pub fn area(&self) -> f64 {
        match &self.shape {
            Shape::Disk { radius } => PI * radius * radius,
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                0.5 * (0..n)
                    .map(|i| {
                        let a = vertices[i];
                        let b = vertices[(i + 1) % n];
                        a[0] * b[1] - a[1] * b[0]
                    })
                    .sum::<f64>()
            }
            Shape::Fourier(p) => {
                let m = 4096;
                (0..m).map(|j| p.r(2.0 * PI * j as f64 / m as f64).powi(2)).sum::<f64>() * PI / m as f64
            }
        }
    }

    /// Rigid rotation by `phi` about the origin.
    pub fn rotated(&self, phi: f64) -> BoundaryCurve {
        let (s, c) = phi.sin_cos();
        let rot = |p: &[f64; 2]| [c * p[0] - s * p[1], s * p[0] + c * p[1]];
        let shape = match &self.shape {
            Shape::Polygon { vertices } => Shape::Polygon { vertices: vertices.iter().map(rot).collect() },
            Shape::Disk { radius } => Shape::Disk { radius: *radius },
            Shape::Fourier(p) => {
                let coeffs = p.coeffs.iter().map(|(&k, v)| (k, v * Complex64::from_polar(1.0, -(k as f64) * phi))).collect();
                Shape::Fourier(FourierPerturbation { coeffs, ..p.clone() })
            }
        };
        BoundaryCurve {
            nodes: self.nodes.iter().map(rot).collect(),
            normals: self.normals.iter().map(rot).collect(),
            weights: self.weights.clone(),
            curvature: self.curvature.clone(),
            total_length: self.total_length,
            star_center: self.star_center.map(|p| rot(&p)),
            shape,
        }
    }

    /// Rows `x, y, nx, ny, w`.
    pub fn rows(&self) -> Vec<[f64; 5]> {
        (0..self.len())
            .map(|i| [self.nodes[i][0], self.nodes[i][1], self.normals[i][0], self.normals[i][1], self.weights[i]])
            .collect()
    }
}

/// Fourier coefficients of `r(θ) - R` for `|k| <= K`, returned with `δ = 1`.
pub fn radial_profile(curve: &BoundaryCurve, r: f64, k_max: usize) -> Result<FourierPerturbation, GeometryError> {
    curve.star_center.ok_or(GeometryError::NotStarShaped)?;
    let m = (8 * k_max + 8).max(4096);
    let samples: Vec<f64> = (0..m)
        .map(|j| curve.radius_at(2.0 * PI * j as f64 / m as f64).map(|v| v - r))
        .collect::<Result<_, _>>()?;
    let mut coeffs = BTreeMap::new();
    let k_max = k_max as i32;
    for k in -k_max..=k_max {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, h) in samples.iter().enumerate() {
            acc += h * Complex64::from_polar(1.0, -(k as f64) * 2.0 * PI * j as f64 / m as f64);
        }
        coeffs.insert(k, acc / m as f64);
    }
    Ok(FourierPerturbation { radius: r, coeffs, delta: 1.0 })
}
