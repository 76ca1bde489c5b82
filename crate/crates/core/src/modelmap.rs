//! Model maps `(F, ω)` into `SL(n+1,R)/SO(n+1)` with prescribed rod data, and
//! a finite-difference tension verifier.
//!
//! The map is `F = h F₀ hᵀ` with `F₀ = diag(e^U, e^V, 1, …, 1)` built from the
//! axis potentials `u_a`, `v_a`, so `F₀` is harmonic. Near the axis the frame
//! `h` depends on `z` only and moves along each rod with the rod's own column
//! of `(hᵀ)⁻¹` frozen; away from the axis the map is blended into a constant
//! frame far field. The twist potential `ω` is constant on every axis
//! component, changes inside horizons, and depends on the polar angle only far
//! out.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use crate::intlin::det2;
use crate::roddiagram::{DiagramError, Endpoint, RodDiagram, Shape};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelMapError {
    #[error("model maps need a half-plane diagram")]
    WrongShape,
    #[error("rod {0}: z-interval and potential constants are required")]
    MissingGeometry(usize),
    #[error("corner between rods {0} and {1} is not admissible")]
    Inadmissible(usize, usize),
    #[error("model maps need at least one horizon rod")]
    NoHorizon,
    #[error("(rho, z) = ({0}, {1}) is a pole of the potential")]
    SingularPoint(f64, f64),
    #[error("frame curve becomes singular on [{0}, {1}]")]
    SingularFrame(f64, f64),
    #[error("structure entries do not fit in f64")]
    Overflow,
    #[error(transparent)]
    Diagram(#[from] DiagramError),
}

/// Quintic smoothstep on `[0, 1]`, clamped outside.
pub fn smoothstep(x: f64) -> f64 {
    let t = x.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// Septic smoothstep, C³ at both ends.
pub fn smoothstep7(x: f64) -> f64 {
    let t = x.clamp(0.0, 1.0);
    t.powi(4) * (35.0 + t * (-84.0 + t * (70.0 - 20.0 * t)))
}

/// `e^{u_a}` and `e^{v_a}`: `r_a ∓ (z - a)`, evaluated without cancellation.
fn exp_potentials(a: f64, rho: f64, z: f64) -> (f64, f64) {
    let zeta = z - a;
    let r = rho.hypot(zeta);
    let eu = if zeta > 0.0 { rho * rho / (r + zeta) } else { r - zeta };
    let ev = if zeta < 0.0 { rho * rho / (r - zeta) } else { r + zeta };
    (eu, ev)
}

/// `(u_a, v_a) = (log(r_a - (z-a)), log(r_a + (z-a)))`; `-inf` on the axis
/// where the argument vanishes.
pub fn potentials(a: f64, rho: f64, z: f64) -> Result<(f64, f64), ModelMapError> {
    if rho == 0.0 && z == a {
        return Err(ModelMapError::SingularPoint(rho, z));
    }
    let (eu, ev) = exp_potentials(a, rho, z);
    Ok((eu.ln(), ev.ln()))
}

/// Five-point axisymmetric Laplacian `f_ρρ + f_ρ/ρ + f_zz`.
pub fn axisymmetric_laplacian(f: impl Fn(f64, f64) -> f64, rho: f64, z: f64, h: f64) -> f64 {
    let c = f(rho, z);
    let (rp, rm) = (f(rho + h, z), f(rho - h, z));
    let (zp, zm) = (f(rho, z + h), f(rho, z - h));
    (rp - 2.0 * c + rm) / (h * h) + (rp - rm) / (2.0 * h * rho) + (zp - 2.0 * c + zm) / (h * h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelMapOptions {
    /// Angular width of the constant-ω caps in the far region.
    pub epsilon: f64,
    /// Radius of the axis tube where the `z`-dependent frame is used.
    pub tube_radius: f64,
    /// Distance between a semi-infinite rod's endpoint and its frame transition.
    pub transition_offset: f64,
    /// Length of the frame transition on semi-infinite rods.
    pub transition_length: f64,
    /// Fraction of a finite rod or horizon used by its transition, centred.
    pub window_fraction: f64,
    /// Let the frozen column drift along rod transitions (negative control).
    pub corrupt_constant_column: bool,
}

impl Default for ModelMapOptions {
    fn default() -> Self {
        ModelMapOptions {
            epsilon: 0.2,
            tube_radius: 2.0,
            transition_offset: 1.0,
            transition_length: 2.0,
            window_fraction: 0.6,
            corrupt_constant_column: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    U,
    V,
}

impl Channel {
    fn column(self) -> usize {
        match self {
            Channel::U => 0,
            Channel::V => 1,
        }
    }

    fn other(self) -> Channel {
        match self {
            Channel::U => Channel::V,
            Channel::V => Channel::U,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Pot {
    U(f64),
    V(f64),
}

/// `Σ sign · log(e^{u_a} or e^{v_a}) + constant`.
#[derive(Debug, Clone, Default)]
struct Harmonic {
    terms: Vec<(f64, Pot)>,
    constant: f64,
}

impl Harmonic {
    fn eval(&self, rho: f64, z: f64) -> f64 {
        let mut s = self.constant;
        for &(sign, pot) in &self.terms {
            let (eu, ev) = match pot {
                Pot::U(a) | Pot::V(a) => exp_potentials(a, rho, z),
            };
            let x = match pot {
                Pot::U(_) => eu,
                Pot::V(_) => ev,
            };
            s += sign * x.ln();
        }
        s
    }
}

/// Path in `GL⁺(n)` from `a0` to `a1`, optionally keeping one column fixed.
#[derive(Debug, Clone)]
struct FramePath {
    a0: DMatrix<f64>,
    fixed: Option<usize>,
    /// Row `fixed` of `a0⁻¹ a1`, without the fixed entry.
    tail: DVector<f64>,
    rotations: Vec<(usize, usize, f64)>,
    r: DMatrix<f64>,
    drift: Option<DVector<f64>>,
}

fn reduced(w: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    w.clone().remove_row(k).remove_column(k)
}

impl FramePath {
    fn new(a0: &DMatrix<f64>, a1: &DMatrix<f64>, fixed: Option<usize>) -> Option<Self> {
        let n = a0.nrows();
        let w = a0.clone().try_inverse()? * a1;
        let (d, tail) = match fixed {
            Some(k) => {
                let row: Vec<f64> = (0..n).filter(|&j| j != k).map(|j| w[(k, j)]).collect();
                (reduced(&w, k), DVector::from_vec(row))
            }
            None => (w, DVector::zeros(0)),
        };
        let m = d.nrows();
        let qr = d.qr();
        let (mut q, mut r) = (qr.q(), qr.r());
        for i in 0..m {
            if r[(i, i)] < 0.0 {
                for j in 0..m {
                    r[(i, j)] = -r[(i, j)];
                    q[(j, i)] = -q[(j, i)];
                }
            }
        }
        if q.determinant() < 0.0 {
            return None;
        }
        let mut rotations = Vec::new();
        let mut rest = q;
        for j in 0..m {
            for i in (j + 1..m).rev() {
                let (x, y) = (rest[(i - 1, j)], rest[(i, j)]);
                if y == 0.0 {
                    continue;
                }
                let theta = y.atan2(x);
                let (s, c) = theta.sin_cos();
                for col in 0..m {
                    let (ra, rb) = (rest[(i - 1, col)], rest[(i, col)]);
                    rest[(i - 1, col)] = c * ra + s * rb;
                    rest[(i, col)] = -s * ra + c * rb;
                }
                rotations.push((i - 1, i, theta));
            }
        }
        let negative: Vec<usize> = (0..m).filter(|&i| rest[(i, i)] < 0.0).collect();
        for pair in negative.chunks(2) {
            rotations.push((pair[0], pair[1], PI));
        }
        Some(FramePath { a0: a0.clone(), fixed, tail, rotations, r, drift: None })
    }

    fn at(&self, t: f64) -> DMatrix<f64> {
        let m = self.r.nrows();
        let mut q = DMatrix::<f64>::identity(m, m);
        // q = Rot_1(tθ_1) ⋯ Rot_K(tθ_K), applied from the right.
        for &(a, b, theta) in self.rotations.iter().rev() {
            let (s, c) = (t * theta).sin_cos();
            for col in 0..m {
                let (x, y) = (q[(a, col)], q[(b, col)]);
                q[(a, col)] = c * x - s * y;
                q[(b, col)] = s * x + c * y;
            }
        }
        let blend = DMatrix::<f64>::identity(m, m) * (1.0 - t) + &self.r * t;
        let d = q * blend;
        let c = match self.fixed {
            None => d,
            Some(k) => {
                let n = m + 1;
                let mut c = DMatrix::<f64>::zeros(n, n);
                let idx = |j: usize| if j < k { j } else { j - 1 };
                c[(k, k)] = 1.0;
                for j in (0..n).filter(|&j| j != k) {
                    c[(k, j)] = t * self.tail[idx(j)];
                    for i in (0..n).filter(|&i| i != k) {
                        c[(i, j)] = d[(idx(i), idx(j))];
                    }
                }
                c
            }
        };
        let mut a = &self.a0 * c;
        if let (Some(k), Some(dir)) = (self.fixed, &self.drift) {
            let bump = 4.0 * t * (1.0 - t);
            for i in 0..a.nrows() {
                a[(i, k)] += bump * dir[i];
            }
        }
        a
    }
}

#[derive(Debug, Clone)]
struct Window<T> {
    lo: f64,
    hi: f64,
    path: T,
}

#[derive(Debug, Clone)]
struct OmegaPath {
    from: DVector<f64>,
    to: DVector<f64>,
}

/// Frame with inverse, cached for the pinned stretches.
#[derive(Debug, Clone)]
struct Frame {
    inv: DMatrix<f64>,
}

impl Frame {
    fn new(b: &DMatrix<f64>) -> Frame {
        Frame { inv: b.clone().try_inverse().expect("pinned frames are invertible") }
    }
}

#[derive(Debug, Clone)]
pub struct ModelMap {
    n: usize,
    options: ModelMapOptions,
    u: Harmonic,
    v: Harmonic,
    far: Frame,
    /// Pinned frames between transitions; `pins.len() == transitions.len() + 1`.
    pins: Vec<Frame>,
    transitions: Vec<Window<FramePath>>,
    omega_pins: Vec<DVector<f64>>,
    omega_transitions: Vec<Window<OmegaPath>>,
    omega_top: DVector<f64>,
    omega_bottom: DVector<f64>,
    /// Finite rod endpoints (poles and corners).
    endpoints: Vec<f64>,
    channels: Vec<Option<Channel>>,
    probes: Vec<f64>,
    far_radius: f64,
}

/// Frame matrix with the given columns fixed and the rest completed from the
/// standard basis.
fn complete_frame(n: usize, fixed: &[(usize, DVector<f64>)]) -> DMatrix<f64> {
    let mut b = DMatrix::<f64>::zeros(n, n);
    for (col, v) in fixed {
        b.set_column(*col, v);
    }
    let free: Vec<usize> = (0..n).filter(|c| fixed.iter().all(|(f, _)| f != c)).collect();
    let mut used: Vec<DVector<f64>> = fixed.iter().map(|(_, v)| v.clone()).collect();
    let mut slots = free.iter();
    let mut slot = slots.next();
    for e in 0..n {
        let Some(&col) = slot else { break };
        let mut trial = used.clone();
        let mut unit = DVector::<f64>::zeros(n);
        unit[e] = 1.0;
        trial.push(unit.clone());
        if DMatrix::from_columns(&trial).rank(1e-9) == trial.len() {
            b.set_column(col, &unit);
            used.push(unit);
            slot = slots.next();
        }
    }
    b
}

fn orient(b: &mut DMatrix<f64>, col: usize) -> bool {
    if b.determinant() < 0.0 {
        let negated = -b.column(col);
        b.set_column(col, &negated);
        true
    } else {
        false
    }
}

impl ModelMap {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn options(&self) -> &ModelMapOptions {
        &self.options
    }

    /// Radius beyond which the map is exactly the far-field model.
    pub fn far_radius(&self) -> f64 {
        self.far_radius
    }

    pub fn endpoints(&self) -> &[f64] {
        &self.endpoints
    }

    pub fn channels(&self) -> &[Option<Channel>] {
        &self.channels
    }

    /// Axis heights worth probing: every transition window and rod interior.
    pub fn probe_heights(&self) -> &[f64] {
        &self.probes
    }

    /// `(hᵀ)⁻¹` on the axis tube at height `z`, inverted.
    fn frame_inverse(&self, z: f64) -> DMatrix<f64> {
        let idx = self.transitions.partition_point(|w| w.hi < z);
        match self.transitions.get(idx) {
            Some(w) if w.lo <= z => {
                let t = smoothstep7((z - w.lo) / (w.hi - w.lo));
                w.path.at(t).try_inverse().expect("frame path stays invertible")
            }
            _ => self.pins[idx].inv.clone(),
        }
    }

    fn omega_axis(&self, z: f64) -> DVector<f64> {
        let idx = self.omega_transitions.partition_point(|w| w.hi < z);
        match self.omega_transitions.get(idx) {
            Some(w) if w.lo <= z => {
                let t = smoothstep7((z - w.lo) / (w.hi - w.lo));
                &w.path.from * (1.0 - t) + &w.path.to * t
            }
            _ => self.omega_pins[idx].clone(),
        }
    }

    fn omega_far(&self, rho: f64, z: f64) -> DVector<f64> {
        let eps = self.options.epsilon;
        let theta = rho.atan2(z);
        let s = smoothstep7((PI - eps - theta) / (PI - 2.0 * eps));
        &self.omega_bottom * (1.0 - s) + &self.omega_top * s
    }

    fn diagonal(&self, rho: f64, z: f64) -> DVector<f64> {
        let mut d = DVector::from_element(self.n, 1.0);
        d[0] = self.u.eval(rho, z).exp();
        d[1] = self.v.eval(rho, z).exp();
        d
    }

    fn conjugate(inv: &DMatrix<f64>, diag: &DVector<f64>) -> DMatrix<f64> {
        // F = B⁻ᵀ diag B⁻¹
        let mut scaled = inv.clone();
        for i in 0..diag.len() {
            scaled.row_mut(i).scale_mut(diag[i]);
        }
        inv.transpose() * scaled
    }

    pub fn eval(&self, rho: f64, z: f64) -> (DMatrix<f64>, DVector<f64>) {
        let delta = self.options.tube_radius;
        let chi = smoothstep7((rho - delta) / delta);
        let diag = self.diagonal(rho, z);
        let f = if chi >= 1.0 {
            Self::conjugate(&self.far.inv, &diag)
        } else if chi <= 0.0 {
            Self::conjugate(&self.frame_inverse(z), &diag)
        } else {
            Self::conjugate(&self.frame_inverse(z), &diag) * (1.0 - chi) + Self::conjugate(&self.far.inv, &diag) * chi
        };
        let omega = if chi >= 1.0 {
            self.omega_far(rho, z)
        } else if chi <= 0.0 {
            self.omega_axis(z)
        } else {
            self.omega_axis(z) * (1.0 - chi) + self.omega_far(rho, z) * chi
        };
        (f, omega)
    }

    /// Sampled `det` of every frame transition, checked for sign changes.
    pub fn check_frames(&self) -> Result<(), ModelMapError> {
        for w in &self.transitions {
            for s in 0..=100 {
                let d = w.path.at(s as f64 / 100.0).determinant();
                if d.is_nan() || d <= 1e-12 {
                    return Err(ModelMapError::SingularFrame(w.lo, w.hi));
                }
            }
        }
        Ok(())
    }
}

/// Anything that can be sampled as `(F, ω)` on the half-plane.
pub trait FieldMap {
    fn dim(&self) -> usize;
    fn fields(&self, rho: f64, z: f64) -> (DMatrix<f64>, DVector<f64>);
}

impl FieldMap for ModelMap {
    fn dim(&self) -> usize {
        self.n
    }

    fn fields(&self, rho: f64, z: f64) -> (DMatrix<f64>, DVector<f64>) {
        self.eval(rho, z)
    }
}

/// `(h F hᵀ, h ω)` for a constant matrix `h`.
pub struct Transformed<'a, M: FieldMap> {
    pub inner: &'a M,
    pub h: DMatrix<f64>,
}

impl<M: FieldMap> FieldMap for Transformed<'_, M> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn fields(&self, rho: f64, z: f64) -> (DMatrix<f64>, DVector<f64>) {
        let (f, w) = self.inner.fields(rho, z);
        (&self.h * f * self.h.transpose(), &self.h * w)
    }
}

fn to_f64_vector(v: &[num_bigint::BigInt]) -> Result<DVector<f64>, ModelMapError> {
    let xs = v.iter().map(|x| x.to_f64().filter(|y| y.is_finite())).collect::<Option<Vec<f64>>>();
    xs.map(DVector::from_vec).ok_or(ModelMapError::Overflow)
}

/// Build the model map for a half-plane diagram carrying `z`-intervals and
/// potential constants.
pub fn build_model_map(d: &RodDiagram, options: &ModelMapOptions) -> Result<ModelMap, ModelMapError> {
    if d.shape() != Shape::HalfPlane {
        return Err(ModelMapError::WrongShape);
    }
    for (i, rod) in d.rods().iter().enumerate() {
        if rod.z.is_none() || (rod.is_axis() && rod.potential().is_none()) {
            return Err(ModelMapError::MissingGeometry(i));
        }
    }
    for c in d.corners() {
        let det = det2(d.structure(c.left).expect("axis"), d.structure(c.right).expect("axis")).expect("same n");
        if !num_traits::One::is_one(&det) {
            return Err(ModelMapError::Inadmissible(c.left, c.right));
        }
    }
    if d.horizons().is_empty() {
        return Err(ModelMapError::NoHorizon);
    }
    let n = d.n();
    let m = d.len();
    let rods = d.rods();
    let zlo = |i: usize| rods[i].z.expect("checked").0;
    let zhi = |i: usize| rods[i].z.expect("checked").1;
    let top = m - 1;
    let bottom_v = to_f64_vector(d.structure(0).expect("axis"))?;
    let top_v = to_f64_vector(d.structure(top).expect("axis"))?;
    let lens_end = !det2(d.structure(0).expect("axis"), d.structure(top).expect("axis")).expect("same n").is_zero();

    let components = d.axis_components();
    let mut channels: Vec<Option<Channel>> = vec![None; m];
    for comp in &components {
        if comp.contains(&0) {
            let mut ch = if lens_end { Channel::V } else { Channel::U };
            for &i in comp {
                channels[i] = Some(ch);
                ch = ch.other();
            }
        } else if comp.contains(&top) {
            let mut ch = Channel::U;
            for &i in comp.iter().rev() {
                channels[i] = Some(ch);
                ch = ch.other();
            }
        } else {
            let mut ch = Channel::U;
            for &i in comp {
                channels[i] = Some(ch);
                ch = ch.other();
            }
        }
    }

    let mut u = Harmonic::default();
    let mut v = Harmonic::default();
    for (i, ch) in channels.iter().enumerate() {
        let Some(ch) = ch else { continue };
        let target = match ch {
            Channel::U => &mut u,
            Channel::V => &mut v,
        };
        match (zlo(i), zhi(i)) {
            (Endpoint::NegInf, Endpoint::Finite(b)) => {
                target.terms.push((1.0, Pot::V(b)));
                target.constant -= std::f64::consts::LN_2;
            }
            (Endpoint::Finite(a), Endpoint::PosInf) => {
                target.terms.push((1.0, Pot::U(a)));
                target.constant -= std::f64::consts::LN_2;
            }
            (Endpoint::Finite(a), Endpoint::Finite(b)) => {
                target.terms.push((1.0, Pot::U(a)));
                target.terms.push((-1.0, Pot::U(b)));
            }
            _ => unreachable!("validated geometry"),
        }
    }

    // Far frame and signed structure columns.
    let mut signed: Vec<Option<DVector<f64>>> = vec![None; m];
    let mut far = if lens_end {
        complete_frame(n, &[(0, top_v.clone()), (1, bottom_v.clone())])
    } else {
        complete_frame(n, &[(0, top_v.clone())])
    };
    let flip_col = if n > 2 || !lens_end {
        if lens_end {
            2
        } else {
            1
        }
    } else {
        0
    };
    orient(&mut far, flip_col);
    signed[top] = Some(far.column(0).into_owned());
    signed[0] = Some(if lens_end { far.column(1).into_owned() } else { far.column(0).into_owned() });

    let vec_of = |i: usize| to_f64_vector(d.structure(i).expect("axis"));
    let mut corner_frames: std::collections::HashMap<(usize, usize), DMatrix<f64>> = Default::default();
    for comp in &components {
        let walk: Vec<usize> =
            if comp.contains(&top) && !comp.contains(&0) { comp.iter().rev().copied().collect() } else { comp.clone() };
        if signed[walk[0]].is_none() {
            signed[walk[0]] = Some(vec_of(walk[0])?);
        }
        for pair in walk.windows(2) {
            let (known, new) = (pair[0], pair[1]);
            let ck = channels[known].expect("axis").column();
            let cn = channels[new].expect("axis").column();
            let mut b = complete_frame(n, &[(ck, signed[known].clone().expect("set")), (cn, vec_of(new)?)]);
            orient(&mut b, cn);
            signed[new] = Some(b.column(cn).into_owned());
            let key = (known.min(new), known.max(new));
            corner_frames.insert(key, b);
        }
    }

    // Frames at the two ends of every axis rod.
    let mut ends: Vec<Option<(DMatrix<f64>, DMatrix<f64>)>> = vec![None; m];
    for i in 0..m {
        let Some(ch) = channels[i] else { continue };
        let below = (i > 0 && rods[i - 1].is_axis()).then(|| corner_frames[&(i - 1, i)].clone());
        let above = (i + 1 < m && rods[i + 1].is_axis()).then(|| corner_frames[&(i, i + 1)].clone());
        let lo_inf = zlo(i) == Endpoint::NegInf;
        let hi_inf = zhi(i) == Endpoint::PosInf;
        let isolated = || {
            let mut b = complete_frame(n, &[(ch.column(), signed[i].clone().expect("set"))]);
            let free = if ch.column() == 0 { 1 } else { 0 };
            orient(&mut b, free);
            b
        };
        let lo = match (&below, lo_inf) {
            (Some(b), _) => b.clone(),
            (None, true) => far.clone(),
            (None, false) => match (&above, hi_inf) {
                (Some(b), _) => b.clone(),
                (None, true) => far.clone(),
                (None, false) => isolated(),
            },
        };
        let hi = match (&above, hi_inf) {
            (Some(b), _) => b.clone(),
            (None, true) => far.clone(),
            (None, false) => lo.clone(),
        };
        ends[i] = Some((lo, hi));
    }

    let mut transitions: Vec<Window<FramePath>> = Vec::new();
    let mut pins = vec![far.clone()];
    let central = |a: f64, b: f64| {
        let margin = (b - a) * (1.0 - options.window_fraction) / 2.0;
        (a + margin, b - margin)
    };
    let mut push = |lo: f64,
                    hi: f64,
                    from: &DMatrix<f64>,
                    to: &DMatrix<f64>,
                    fixed: Option<usize>,
                    pins: &mut Vec<DMatrix<f64>>|
     -> Result<(), ModelMapError> {
        if (from - to).amax() < 1e-14 {
            return Ok(());
        }
        let mut path = FramePath::new(from, to, fixed).ok_or(ModelMapError::SingularFrame(lo, hi))?;
        if options.corrupt_constant_column {
            if let Some(k) = fixed {
                let other = (k + 1) % n;
                let dir = from.column(other).normalize() * from.column(k).norm();
                path.drift = Some(dir);
            }
        }
        transitions.push(Window { lo, hi, path });
        pins.push(to.clone());
        Ok(())
    };
    let mut current = far.clone();
    for i in 0..m {
        let (lo_z, hi_z) = (zlo(i), zhi(i));
        match channels[i] {
            Some(ch) => {
                let (b_lo, b_hi) = ends[i].clone().expect("axis");
                if (&current - &b_lo).amax() > 1e-14 {
                    return Err(ModelMapError::SingularFrame(
                        lo_z.finite().unwrap_or(f64::NAN),
                        hi_z.finite().unwrap_or(f64::NAN),
                    ));
                }
                let window = match (lo_z, hi_z) {
                    (Endpoint::NegInf, Endpoint::Finite(b)) => {
                        (b - options.transition_offset - options.transition_length, b - options.transition_offset)
                    }
                    (Endpoint::Finite(a), Endpoint::PosInf) => {
                        (a + options.transition_offset, a + options.transition_offset + options.transition_length)
                    }
                    (Endpoint::Finite(a), Endpoint::Finite(b)) => central(a, b),
                    _ => unreachable!("validated geometry"),
                };
                push(window.0, window.1, &b_lo, &b_hi, Some(ch.column()), &mut pins)?;
                current = b_hi;
            }
            None => {
                let (a, b) = (lo_z.finite().expect("finite"), hi_z.finite().expect("finite"));
                let (_, next_lo) = ends[i + 1].clone().map(|(lo, _)| ((), lo)).expect("axis after horizon");
                let (w0, w1) = central(a, b);
                push(w0, w1, &current, &next_lo, None, &mut pins)?;
                current = next_lo;
            }
        }
    }

    let omega_of = |i: usize| DVector::from_column_slice(rods[i].potential().expect("checked"));
    let mut omega_pins = vec![omega_of(0)];
    let mut omega_transitions = Vec::new();
    for h in d.horizons() {
        let (a, b) = (zlo(h.index).finite().expect("finite"), zhi(h.index).finite().expect("finite"));
        let (w0, w1) = central(a, b);
        let from = omega_of(h.before);
        let to = omega_of(h.after);
        omega_transitions.push(Window { lo: w0, hi: w1, path: OmegaPath { from, to: to.clone() } });
        omega_pins.push(to);
    }

    let mut endpoints: Vec<f64> = rods.iter().filter_map(|r| r.z.and_then(|(_, hi)| hi.finite())).collect();
    endpoints.dedup();
    let reach = transitions
        .iter()
        .flat_map(|w| [w.lo.abs(), w.hi.abs()])
        .chain(endpoints.iter().map(|e| e.abs()))
        .fold(0.0, f64::max)
        + 1.0;
    let delta = options.tube_radius;
    let far_radius = (reach.hypot(2.0 * delta)).max(2.0 * delta / options.epsilon.sin()) + 1.0;

    let mut probes: Vec<f64> = transitions.iter().map(|w| (w.lo + w.hi) / 2.0).collect();
    let beyond = options.transition_offset + options.transition_length + 1.0;
    for rod in rods {
        probes.push(match rod.z.expect("checked") {
            (Endpoint::Finite(a), Endpoint::Finite(b)) => (a + b) / 2.0,
            (Endpoint::NegInf, Endpoint::Finite(b)) => b - beyond,
            (Endpoint::Finite(a), _) => a + beyond,
            _ => continue,
        });
    }
    probes.sort_by(f64::total_cmp);
    probes.dedup();

    let map = ModelMap {
        n,
        options: options.clone(),
        u,
        v,
        far: Frame::new(&far),
        pins: pins.iter().map(Frame::new).collect(),
        transitions,
        omega_pins,
        omega_transitions,
        omega_top: omega_of(top),
        omega_bottom: omega_of(0),
        endpoints,
        channels,
        probes,
        far_radius,
    };
    if !options.corrupt_constant_column {
        map.check_frames()?;
    }
    Ok(map)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensionSample {
    pub rho: f64,
    pub z: f64,
    /// `|τ|`
    pub tau: f64,
    /// Frobenius norm of `τ^F = F (div H + G)`.
    pub tau_f: f64,
    /// Euclidean norm of `τ^ω = f F div K`.
    pub tau_omega: f64,
}

fn inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().try_inverse().unwrap_or_else(|| DMatrix::from_element(m.nrows(), m.ncols(), f64::NAN))
}

/// Tension of `(F, ω)` at one point, from a staggered centered-difference stencil
/// of spacing `h` and the axisymmetric divergence `(1/ρ)∂_ρ(ρ V_ρ) + ∂_z V_z`.
pub fn tension_at<M: FieldMap + ?Sized>(map: &M, rho: f64, z: f64, h: f64) -> TensionSample {
    let (fc, wc) = map.fields(rho, z);
    let (frp, wrp) = map.fields(rho + h, z);
    let (frm, wrm) = map.fields(rho - h, z);
    let (fzp, wzp) = map.fields(rho, z + h);
    let (fzm, wzm) = map.fields(rho, z - h);
    let half = |r: f64, zz: f64| {
        let (f, _) = map.fields(r, zz);
        let det = f.determinant();
        (inverse(&f), det)
    };
    let (irp, drp) = half(rho + h / 2.0, z);
    let (irm, drm) = half(rho - h / 2.0, z);
    let (izp, dzp) = half(rho, z + h / 2.0);
    let (izm, dzm) = half(rho, z - h / 2.0);

    let h_rp = &irp * (&frp - &fc) / h;
    let h_rm = &irm * (&fc - &frm) / h;
    let h_zp = &izp * (&fzp - &fc) / h;
    let h_zm = &izm * (&fc - &fzm) / h;
    let div_h = (h_rp * (rho + h / 2.0) - h_rm * (rho - h / 2.0)) / (rho * h) + (h_zp - h_zm) / h;

    let k_rp = &irp * (&wrp - &wc) / (h * drp);
    let k_rm = &irm * (&wc - &wrm) / (h * drm);
    let k_zp = &izp * (&wzp - &wc) / (h * dzp);
    let k_zm = &izm * (&wc - &wzm) / (h * dzm);
    let div_k = (k_rp * (rho + h / 2.0) - k_rm * (rho - h / 2.0)) / (rho * h) + (k_zp - k_zm) / h;

    let fdet = fc.determinant();
    let finv = inverse(&fc);
    let w_rho = (&wrp - &wrm) / (2.0 * h);
    let w_z = (&wzp - &wzm) / (2.0 * h);
    let grad_sq = &w_rho * w_rho.transpose() + &w_z * w_z.transpose();
    let g = &finv * grad_sq / fdet;
    let m = div_h + g;
    let tr = m.trace();
    let tr_sq = (&m * &m).trace();
    let twist = fdet * (div_k.transpose() * &fc * &div_k)[(0, 0)];
    let tau_sq = 0.25 * tr * tr + 0.25 * tr_sq + 0.5 * twist;
    TensionSample {
        rho,
        z,
        tau: tau_sq.max(0.0).sqrt(),
        tau_f: (&fc * &m).norm(),
        tau_omega: (&fc * &div_k * fdet).norm(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub h: f64,
    /// Points with `ρ < excision_factor · h` are skipped.
    pub excision_factor: f64,
    /// Points closer than this to a rod endpoint are skipped.
    pub endpoint_radius: f64,
    pub rho_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    /// Radii bounding the compact annuli, centred at the origin.
    pub annuli: Vec<f64>,
    pub rays: usize,
    pub decay_samples: usize,
    /// Start of the decay decade; defaults to twice the map's far radius.
    pub decay_start: Option<f64>,
    pub slope_threshold: f64,
    pub sup_ratio_threshold: f64,
    /// Values below this are treated as discretisation noise.
    pub noise_floor: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            h: 0.05,
            excision_factor: 3.0,
            endpoint_radius: 0.5,
            rho_max: 8.0,
            z_min: -16.0,
            z_max: 16.0,
            annuli: vec![0.0, 4.0, 8.0, 16.0],
            rays: 5,
            decay_samples: 12,
            decay_start: None,
            slope_threshold: -2.3,
            sup_ratio_threshold: 1.1,
            noise_floor: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnulusSup {
    pub inner: f64,
    pub outer: f64,
    pub sup_h: f64,
    pub sup_half: f64,
    /// Growth `sup_half / sup_h`; 1 when both are below the noise floor.
    pub ratio: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RayFit {
    pub theta: f64,
    pub slope: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub r_min: f64,
    pub r_max: f64,
    pub rays: Vec<RayFit>,
    pub pooled_slope: f64,
    pub pooled_stderr: f64,
    /// Far-field tension is pure discretisation error: it drops by at least
    /// half under `h -> h/2`, or sits below the noise floor.
    pub harmonic: bool,
    pub passed: bool,
}

/// `|τ|` at a fixed height as `ρ -> 0`, with stencil `ρ/8`.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisProbe {
    pub z: f64,
    pub rhos: Vec<f64>,
    pub taus: Vec<f64>,
    /// Log-log slope of `|τ|` against `ρ`; about `-2` when the tension blows up.
    pub slope: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensionReport {
    pub grid: GridSpec,
    pub points: usize,
    pub sup_tau: f64,
    pub sup_tau_f: f64,
    pub sup_tau_omega: f64,
    pub annuli: Vec<AnnulusSup>,
    pub decay: DecayFit,
    pub axis: Vec<AxisProbe>,
    /// Coarse-grid samples, for field dumps.
    pub samples: Vec<TensionSample>,
}

impl TensionReport {
    pub fn sup_passed(&self) -> bool {
        self.annuli.iter().all(|a| a.passed)
    }

    pub fn axis_passed(&self) -> bool {
        self.axis.iter().all(|p| p.passed)
    }

    pub fn passed(&self) -> bool {
        self.sup_passed() && self.decay.passed && self.axis_passed()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("rho,z,tau,tau_f,tau_omega\n");
        for s in &self.samples {
            let _ = writeln!(out, "{},{},{:e},{:e},{:e}", s.rho, s.z, s.tau, s.tau_f, s.tau_omega);
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "grid": {
                "h": self.grid.h,
                "excision_radius": self.grid.excision_factor * self.grid.h,
                "endpoint_radius": self.grid.endpoint_radius,
                "rho_max": self.grid.rho_max,
                "z_range": [self.grid.z_min, self.grid.z_max],
            },
            "points": self.points,
            "sup_tau": self.sup_tau,
            "sup_tau_f": self.sup_tau_f,
            "sup_tau_omega": self.sup_tau_omega,
            "annuli": self.annuli.iter().map(|a| serde_json::json!({
                "r": [a.inner, a.outer], "sup_h": a.sup_h, "sup_half_h": a.sup_half,
                "ratio": a.ratio, "passed": a.passed,
            })).collect::<Vec<_>>(),
            "decay": {
                "r": [self.decay.r_min, self.decay.r_max],
                "pooled_slope": self.decay.pooled_slope,
                "pooled_stderr": self.decay.pooled_stderr,
                "band": [
                    self.decay.pooled_slope - 2.0 * self.decay.pooled_stderr,
                    self.decay.pooled_slope + 2.0 * self.decay.pooled_stderr,
                ],
                "rays": self.decay.rays.iter().map(|r| serde_json::json!({
                    "theta": r.theta, "slope": r.slope, "stderr": r.stderr,
                })).collect::<Vec<_>>(),
                "harmonic": self.decay.harmonic,
                "passed": self.decay.passed,
            },
            "axis": self.axis.iter().map(|p| serde_json::json!({
                "z": p.z, "rho": p.rhos, "tau": p.taus, "slope": p.slope, "passed": p.passed,
            })).collect::<Vec<_>>(),
            "sup_passed": self.sup_passed(),
            "axis_passed": self.axis_passed(),
            "passed": self.passed(),
        })
    }
}

/// Ordinary least squares slope and its standard error.
pub fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let resid: f64 = x.iter().zip(y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    let stderr = if n > 2.0 { (resid / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    (slope, stderr)
}

fn grid_points(spec: &GridSpec, endpoints: &[f64]) -> Vec<(f64, f64)> {
    let h = spec.h;
    let rho_min = spec.excision_factor * h;
    let mut pts = Vec::new();
    let nr = (spec.rho_max / h).floor() as i64;
    let nz = ((spec.z_max - spec.z_min) / h).round() as i64;
    for i in 1..=nr {
        let rho = i as f64 * h;
        if rho < rho_min - 1e-12 {
            continue;
        }
        for j in 0..=nz {
            let z = spec.z_min + j as f64 * h;
            if endpoints.iter().any(|&e| rho.hypot(z - e) < spec.endpoint_radius) {
                continue;
            }
            pts.push((rho, z));
        }
    }
    pts
}

/// Sample the tension on the compact window with stencils `h` and `h/2` at
/// the same points, probe it towards the axis, and fit its decay along rays
/// through the far region.
pub fn verify_tension(map: &ModelMap, spec: &GridSpec) -> TensionReport {
    let points = grid_points(spec, map.endpoints());
    let coarse: Vec<TensionSample> = points.iter().map(|&(r, z)| tension_at(map, r, z, spec.h)).collect();
    let fine: Vec<TensionSample> = points.iter().map(|&(r, z)| tension_at(map, r, z, spec.h / 2.0)).collect();
    let sup_in = |samples: &[TensionSample], a: f64, b: f64| {
        samples
            .iter()
            .filter(|s| {
                let r = s.rho.hypot(s.z);
                r >= a && r < b
            })
            .map(|s| s.tau)
            .fold(0.0, f64::max)
    };
    let annuli = spec
        .annuli
        .windows(2)
        .map(|w| {
            let (sup_h, sup_half) = (sup_in(&coarse, w[0], w[1]), sup_in(&fine, w[0], w[1]));
            let ratio = if sup_h.max(sup_half) <= spec.noise_floor { 1.0 } else { sup_half / sup_h };
            AnnulusSup { inner: w[0], outer: w[1], sup_h, sup_half, ratio, passed: ratio < spec.sup_ratio_threshold }
        })
        .collect();
    let decay = decay_fit(map, spec);
    let axis = map.probe_heights().iter().map(|&z| axis_probe(map, z, spec.noise_floor)).collect();
    let fold = |f: fn(&TensionSample) -> f64| coarse.iter().map(f).fold(0.0, f64::max);
    TensionReport {
        grid: spec.clone(),
        points: points.len(),
        sup_tau: fold(|s| s.tau),
        sup_tau_f: fold(|s| s.tau_f),
        sup_tau_omega: fold(|s| s.tau_omega),
        annuli,
        decay,
        axis,
        samples: coarse,
    }
}

/// `|τ|` at `ρ = 0.4, 0.2, 0.1, 0.05` above the axis point `z`.
pub fn axis_probe<M: FieldMap + ?Sized>(map: &M, z: f64, noise_floor: f64) -> AxisProbe {
    let rhos: Vec<f64> = (0..4).map(|k| 0.4 / 2f64.powi(k)).collect();
    let taus: Vec<f64> = rhos.iter().map(|&r| tension_at(map, r, z, r / 8.0).tau).collect();
    let slope = if taus.iter().all(|&t| t <= noise_floor) {
        0.0
    } else {
        let x: Vec<f64> = rhos.iter().map(|r| r.ln()).collect();
        let y: Vec<f64> = taus.iter().map(|t| t.max(f64::MIN_POSITIVE).ln()).collect();
        ols_slope(&x, &y).0
    };
    let passed = taus.iter().all(|t| t.is_finite()) && slope > -0.5;
    AxisProbe { z, rhos, taus, slope, passed }
}

fn decay_fit(map: &ModelMap, spec: &GridSpec) -> DecayFit {
    let eps = map.options().epsilon;
    let r_min = spec.decay_start.unwrap_or(2.0 * map.far_radius());
    let r_max = 10.0 * r_min;
    let k = spec.decay_samples.max(3);
    let radii: Vec<f64> = (0..k).map(|i| r_min * 10f64.powf(i as f64 / (k - 1) as f64)).collect();
    let mut rays = Vec::new();
    let (mut all_x, mut all_y) = (Vec::new(), Vec::new());
    let mut harmonic = true;
    for j in 0..spec.rays.max(1) {
        let theta = eps + (PI - 2.0 * eps) * (j + 1) as f64 / (spec.rays.max(1) + 1) as f64;
        let at = |r: f64, h: f64| tension_at(map, r * theta.sin(), r * theta.cos(), h).tau;
        let taus: Vec<f64> = radii.iter().map(|&r| at(r, spec.h)).collect();
        for (&r, &t) in radii.iter().zip(&taus) {
            if t > spec.noise_floor && at(r, spec.h / 2.0) > 0.5 * t {
                harmonic = false;
            }
        }
        let x: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
        let y: Vec<f64> = taus.iter().map(|t| t.max(f64::MIN_POSITIVE).ln()).collect();
        let (slope, stderr) = ols_slope(&x, &y);
        rays.push(RayFit { theta, slope, stderr });
        all_x.extend(x);
        all_y.extend(y);
    }
    let (pooled_slope, pooled_stderr) = ols_slope(&all_x, &all_y);
    let passed = harmonic || rays.iter().all(|r| r.slope <= spec.slope_threshold);
    DecayFit { r_min, r_max, rays, pooled_slope, pooled_stderr, harmonic, passed }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub hs: Vec<f64>,
    /// RMS of `|τ|` over the probe points, per `h`.
    pub rms: Vec<f64>,
    pub orders: Vec<f64>,
}

impl ConvergenceReport {
    pub fn within(&self, lo: f64, hi: f64) -> bool {
        !self.orders.is_empty() && self.orders.iter().all(|o| (lo..=hi).contains(o))
    }
}

/// Observed order of the tension residual under successive halving of `h`.
/// Uses differences of successive values, so it also applies when the exact
/// tension does not vanish.
pub fn residual_convergence<M: FieldMap + ?Sized>(
    map: &M,
    points: &[(f64, f64)],
    h: f64,
    levels: usize,
) -> ConvergenceReport {
    let hs: Vec<f64> = (0..levels.max(3)).map(|i| h / 2f64.powi(i as i32)).collect();
    let values: Vec<Vec<f64>> =
        hs.iter().map(|&hh| points.iter().map(|&(r, z)| tension_at(map, r, z, hh).tau).collect()).collect();
    let rms = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
    let rms_values: Vec<f64> = values.iter().map(|v| rms(v)).collect();
    let diffs: Vec<f64> =
        values.windows(2).map(|w| rms(&w[0].iter().zip(&w[1]).map(|(a, b)| a - b).collect::<Vec<_>>())).collect();
    let orders = diffs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    ConvergenceReport { hs, rms: rms_values, orders }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potentials_on_axis() {
        let (u, v) = potentials(0.0, 0.0, 1.0).unwrap();
        assert_eq!(u, f64::NEG_INFINITY);
        assert!((v - 2f64.ln()).abs() < 1e-15);
        assert!(potentials(0.5, 0.0, 0.5).is_err());
    }

    #[test]
    fn potentials_are_harmonic() {
        let mut prev: Option<f64> = None;
        for h in [0.02, 0.01, 0.005] {
            let res = axisymmetric_laplacian(|r, z| potentials(0.0, r, z).unwrap().0, 0.8, 0.3, h).abs();
            if let Some(p) = prev {
                let order = (p / res).log2();
                assert!((1.8..=2.2).contains(&order), "order {order}");
            }
            prev = Some(res);
        }
    }

    #[test]
    fn frame_path_keeps_column_and_orientation() {
        let a0 = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let a1 = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 2.0, 0.0, 1.0, 0.0, 3.0, 0.0, -1.0]);
        let mut a1 = a1;
        orient(&mut a1, 2);
        let p = FramePath::new(&a0, &a1, Some(1)).unwrap();
        for i in 0..=50 {
            let t = i as f64 / 50.0;
            let a = p.at(t);
            assert!((a.column(1) - a0.column(1)).amax() < 1e-12);
            assert!(a.determinant() > 0.0);
        }
        assert!((p.at(1.0) - &a1).amax() < 1e-12);
        assert!((p.at(0.0) - &a0).amax() < 1e-12);
        let free =
            FramePath::new(&a0, &DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0, 3.0])), None).unwrap();
        assert!((free.at(1.0) - DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0, 3.0]))).amax() < 1e-12);
    }
}
