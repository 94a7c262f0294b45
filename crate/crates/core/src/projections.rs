//! Ball-sum phantoms, their analytic projections (spherical, planar,
//! line, circular) and detector geometries.
//!
//! Phantoms are finite sums of uniform balls so that all projections have
//! closed forms or 1-D quadratures with exact oracles.

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Two unit vectors spanning the plane orthogonal to `n`.
pub fn plane_basis(n: &Vec3) -> (Vec3, Vec3) {
    let helper = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let mut e1 = cross(n, &helper);
    let l = norm(&e1);
    e1 = scale(&e1, 1.0 / l);
    let e2 = cross(n, &e1);
    (e1, e2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ball {
    pub center: Vec3,
    pub radius: f64,
    pub amplitude: f64,
}

/// φ as a finite sum of uniform balls.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Phantom {
    pub balls: Vec<Ball>,
}

impl Phantom {
    pub fn new(balls: Vec<Ball>) -> Result<Self> {
        for (i, b) in balls.iter().enumerate() {
            if !(b.radius > 0.0) || !b.radius.is_finite() {
                return Err(Error::InvalidPhantom(format!(
                    "ball {i}: need radius > 0, got {}",
                    b.radius
                )));
            }
            if !b.amplitude.is_finite() || b.center.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidPhantom(format!("ball {i}: non-finite parameters")));
            }
        }
        Ok(Phantom { balls })
    }

    pub fn single(center: Vec3, radius: f64, amplitude: f64) -> Result<Self> {
        Phantom::new(vec![Ball { center, radius, amplitude }])
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn max_radius(&self) -> f64 {
        self.balls.iter().map(|b| b.radius).fold(0.0, f64::max)
    }

    /// All balls strictly inside the open ball of radius `r0`.
    pub fn check_inside(&self, r0: f64) -> Result<()> {
        for (i, b) in self.balls.iter().enumerate() {
            if norm(&b.center) + b.radius >= r0 {
                return Err(Error::InvalidPhantom(format!(
                    "ball {i} reaches |x| = {:.6} but must stay inside B_{r0}",
                    norm(&b.center) + b.radius
                )));
            }
        }
        Ok(())
    }

    /// Pointwise value (the sum of ball amplitudes containing x).
    pub fn value(&self, x: &Vec3) -> f64 {
        self.balls
            .iter()
            .filter(|b| norm(&sub(x, &b.center)) <= b.radius)
            .map(|b| b.amplitude)
            .sum()
    }
}

/// R_sp(φ)(x, t): integral of φ over the sphere of radius t about x.
///
/// Per ball with d = |x - c| > 0 the lens area gives
/// π t (R² - (d-t)²)/d on the band |d-t| ≤ R ≤ d+t, and 4πt² when the
/// whole sphere lies inside the ball; the concentric case d = 0 is the
/// analytic limit 4πt² for t ≤ R.
pub fn spherical_projection(phantom: &Phantom, x: &Vec3, t: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    let mut out = 0.0;
    for b in &phantom.balls {
        let d = norm(&sub(x, &b.center));
        if d < 1e-14 {
            if t <= b.radius {
                out += b.amplitude * 4.0 * std::f64::consts::PI * t * t;
            }
            continue;
        }
        if t + d <= b.radius {
            out += b.amplitude * 4.0 * std::f64::consts::PI * t * t;
        } else if (d - t).abs() <= b.radius {
            out += b.amplitude * std::f64::consts::PI * t
                * (b.radius * b.radius - (d - t) * (d - t))
                / d;
        }
    }
    out
}

/// R_pl(φ)(n, s): integral of φ over the plane { x·n = s }. Valid for any
/// real signed offset s.
pub fn planar_projection(phantom: &Phantom, n: &Vec3, s: f64) -> f64 {
    let mut out = 0.0;
    for b in &phantom.balls {
        let u = b.radius * b.radius - (s - dot(&b.center, n)) * (s - dot(&b.center, n));
        if u > 0.0 {
            out += b.amplitude * std::f64::consts::PI * u;
        }
    }
    out
}

/// Φ_n(x) = L_n(φ)(x): integral of φ along the line through x ∈ E(n,0)
/// parallel to n.
pub fn line_integral(phantom: &Phantom, n: &Vec3, x: &Vec3) -> f64 {
    let mut out = 0.0;
    for b in &phantom.balls {
        let c_perp = sub(&b.center, &scale(n, dot(&b.center, n)));
        let rho2 = {
            let d = sub(x, &c_perp);
            dot(&d, &d)
        };
        if rho2 < b.radius * b.radius {
            out += b.amplitude * 2.0 * (b.radius * b.radius - rho2).sqrt();
        }
    }
    out
}

/// R_circ(Φ_n)(x, t): integral of Φ_n over the circle of radius t about
/// x in the plane E(n, 0). Trapezoid rule over the angle with the node
/// count scaled to the circumference, Richardson-checked by doubling.
pub fn circular_projection(phantom: &Phantom, n: &Vec3, x: &Vec3, t: f64) -> Result<f64> {
    if dot(x, n).abs() > 1e-9 * (1.0 + norm(x)) {
        return Err(Error::Range(format!("x·n = {} but x must lie in E(n,0)", dot(x, n))));
    }
    if t <= 0.0 {
        return Ok(0.0);
    }
    if phantom.is_empty() {
        return Ok(0.0);
    }
    let feature = phantom.balls.iter().map(|b| b.radius).fold(f64::INFINITY, f64::min);
    let mut m = ((2.0 * std::f64::consts::PI * t / (0.2 * feature)).ceil() as usize).max(64);
    let (e1, e2) = plane_basis(n);
    let eval = |m: usize| -> f64 {
        let mut acc = 0.0;
        for q in 0..m {
            let th = 2.0 * std::f64::consts::PI * q as f64 / m as f64;
            let p = add(
                x,
                &add(&scale(&e1, t * th.cos()), &scale(&e2, t * th.sin())),
            );
            acc += line_integral(phantom, n, &p);
        }
        acc * 2.0 * std::f64::consts::PI * t / m as f64
    };
    let mut prev = eval(m);
    for _ in 0..8 {
        m *= 2;
        let cur = eval(m);
        let scale_ref = cur.abs().max(1e-12);
        if (cur - prev).abs() <= 1e-6 * scale_ref {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::QuadratureNonConvergence(format!(
        "circular projection at t = {t} did not converge by {m} nodes"
    )))
}

/// Quadrature directions on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SphereScheme {
    /// Fibonacci spiral, equal weights 4π/N. Any N.
    Fibonacci,
    /// Gauss-Legendre in cos(polar) × uniform azimuth; N = n_polar·n_az
    /// with n_az = 2·n_polar (N must have that factorization).
    LatLong,
}

/// Unit directions with quadrature weights summing to 4π.
pub fn sphere_quadrature(scheme: SphereScheme, count: usize) -> Result<Vec<(Vec3, f64)>> {
    match scheme {
        SphereScheme::Fibonacci => {
            let n = count;
            let golden = std::f64::consts::PI * (1.0 + 5.0_f64.sqrt());
            let w = 4.0 * std::f64::consts::PI / n as f64;
            Ok((0..n)
                .map(|i| {
                    let k = i as f64 + 0.5;
                    let phi = (1.0 - 2.0 * k / n as f64).acos();
                    let theta = golden * k;
                    (
                        [phi.sin() * theta.cos(), phi.sin() * theta.sin(), phi.cos()],
                        w,
                    )
                })
                .collect())
        }
        SphereScheme::LatLong => {
            let mut n_pol = ((count as f64) / 2.0).sqrt().round() as usize;
            n_pol = n_pol.max(1);
            let n_az = 2 * n_pol;
            if n_pol * n_az != count {
                return Err(Error::Range(format!(
                    "lat-long scheme needs count = 2k² (got {count}); nearest is {}",
                    2 * n_pol * n_pol
                )));
            }
            let (nodes, weights) = gauss_legendre(n_pol);
            let mut out = Vec::with_capacity(count);
            for i in 0..n_pol {
                let ct = nodes[i];
                let st = (1.0 - ct * ct).sqrt();
                for j in 0..n_az {
                    let ph = 2.0 * std::f64::consts::PI * j as f64 / n_az as f64;
                    out.push((
                        [st * ph.cos(), st * ph.sin(), ct],
                        weights[i] * 2.0 * std::f64::consts::PI / n_az as f64,
                    ));
                }
            }
            Ok(out)
        }
    }
}

/// Gauss-Legendre nodes/weights on (-1, 1) by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Detector placements at distance R₀ from the origin.
#[derive(Debug, Clone)]
pub enum DetectorSet {
    /// Point detectors on the sphere of radius R₀, with quadrature weights.
    PointSphere { r0: f64, directions: Vec<(Vec3, f64)> },
    /// Planar detectors tangent to the sphere of radius R₀ (unit normals).
    PlanarTangent { r0: f64, normals: Vec<Vec3> },
    /// Line detectors normal to the plane E(n,0), positioned on the circle
    /// ∂B_{R₀} ∩ E.
    LineArray { r0: f64, normal: Vec3, positions: Vec<Vec3> },
}

impl DetectorSet {
    pub fn point_sphere(r0: f64, scheme: SphereScheme, count: usize) -> Result<Self> {
        let dirs = sphere_quadrature(scheme, count)?;
        Ok(DetectorSet::PointSphere {
            r0,
            directions: dirs,
        })
    }

    pub fn planar_tangent(r0: f64, scheme: SphereScheme, count: usize) -> Result<Self> {
        let normals = sphere_quadrature(scheme, count)?
            .into_iter()
            .map(|(n, _)| n)
            .collect();
        Ok(DetectorSet::PlanarTangent { r0, normals })
    }

    pub fn line_array(r0: f64, normal: Vec3, count: usize) -> Result<Self> {
        let l = norm(&normal);
        if l == 0.0 {
            return Err(Error::Range("line-array normal must be nonzero".into()));
        }
        let n = scale(&normal, 1.0 / l);
        let (e1, e2) = plane_basis(&n);
        let positions = (0..count)
            .map(|i| {
                let th = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
                add(&scale(&e1, r0 * th.cos()), &scale(&e2, r0 * th.sin()))
            })
            .collect();
        Ok(DetectorSet::LineArray { r0, normal: n, positions })
    }

    pub fn r0(&self) -> f64 {
        match self {
            DetectorSet::PointSphere { r0, .. } => *r0,
            DetectorSet::PlanarTangent { r0, .. } => *r0,
            DetectorSet::LineArray { r0, .. } => *r0,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            DetectorSet::PointSphere { directions, .. } => directions.len(),
            DetectorSet::PlanarTangent { normals, .. } => normals.len(),
            DetectorSet::LineArray { positions, .. } => positions.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Positions at distance R₀ and unit vectors normalized to 1e-12.
    pub fn validate(&self) -> Result<()> {
        let check_unit = |v: &Vec3| (norm(v) - 1.0).abs() <= 1e-12;
        match self {
            DetectorSet::PointSphere { r0, directions } => {
                for (d, _) in directions {
                    if !check_unit(d) {
                        return Err(Error::Range("point direction not unit".into()));
                    }
                    let _ = r0;
                }
            }
            DetectorSet::PlanarTangent { normals, .. } => {
                for n in normals {
                    if !check_unit(n) {
                        return Err(Error::Range("planar normal not unit".into()));
                    }
                }
            }
            DetectorSet::LineArray { r0, positions, normal } => {
                if !check_unit(normal) {
                    return Err(Error::Range("line normal not unit".into()));
                }
                for p in positions {
                    if (norm(p) - r0).abs() > 1e-12 * r0.max(1.0) {
                        return Err(Error::Range("line detector not at distance R0".into()));
                    }
                }
            }
        }
        Ok(())
    }
}
