//! Rod diagrams: the labelled boundary of the orbit space.
//!
//! A diagram is an ordered list of axis rods (labelled by a primitive
//! isotropy vector) and horizon rods. Half-plane diagrams describe domains of
//! outer communication and start and end with semi-infinite axis rods; disk
//! diagrams describe closed orbit spaces and are read cyclically.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::{json, Value};
use thiserror::Error;

use crate::intlin::{
    det2, format_vector, hermite_normal_form, is_primitive_vector, sign_normalize, IntLinError, IntMatrix, IntVector,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagramError {
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("rod {index}: {message}")]
    Rod { index: usize, message: String },
    #[error("rods {left} and {right}: adjacent axis rods carry the same structure")]
    AdjacentEqual { left: usize, right: usize },
    #[error("rods {left} and {right}: potential constants disagree across the corner")]
    PotentialMismatch { left: usize, right: usize },
    #[error("rods {left} and {right}: two horizon rods are adjacent")]
    AdjacentHorizons { left: usize, right: usize },
    #[error("structures are parallel, no corner can join them")]
    Parallel,
    #[error("diagrams are not comparable: {0}")]
    Incompatible(String),
    #[error("operation needs a {expected} diagram")]
    WrongShape { expected: &'static str },
    #[error(transparent)]
    IntLin(#[from] IntLinError),
}

fn rod_err(index: usize, message: impl Into<String>) -> DiagramError {
    DiagramError::Rod { index, message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    HalfPlane,
    Disk,
}

impl Shape {
    pub fn as_str(self) -> &'static str {
        match self {
            Shape::HalfPlane => "half_plane",
            Shape::Disk => "disk",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Endpoint {
    NegInf,
    Finite(f64),
    PosInf,
}

impl Endpoint {
    pub fn finite(self) -> Option<f64> {
        match self {
            Endpoint::Finite(x) => Some(x),
            _ => None,
        }
    }

    fn order_key(self) -> f64 {
        match self {
            Endpoint::NegInf => f64::NEG_INFINITY,
            Endpoint::Finite(x) => x,
            Endpoint::PosInf => f64::INFINITY,
        }
    }

    fn to_json(self) -> Value {
        match self {
            Endpoint::NegInf => json!("-inf"),
            Endpoint::PosInf => json!("+inf"),
            Endpoint::Finite(x) => json!(x),
        }
    }

    fn from_json(v: &Value) -> Option<Endpoint> {
        match v {
            Value::String(s) if s == "-inf" => Some(Endpoint::NegInf),
            Value::String(s) if s == "+inf" || s == "inf" => Some(Endpoint::PosInf),
            Value::Number(x) => x.as_f64().filter(|x| x.is_finite()).map(Endpoint::Finite),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RodKind {
    Axis {
        /// Sign-normalized structure.
        structure: IntVector,
        /// Structure as given in the input.
        raw: IntVector,
        potential: Option<Vec<f64>>,
    },
    Horizon,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rod {
    pub kind: RodKind,
    pub z: Option<(Endpoint, Endpoint)>,
}

impl Rod {
    pub fn axis(v: IntVector) -> Rod {
        Rod { kind: RodKind::Axis { structure: sign_normalize(&v), raw: v, potential: None }, z: None }
    }

    pub fn horizon() -> Rod {
        Rod { kind: RodKind::Horizon, z: None }
    }

    pub fn with_z(mut self, lo: Endpoint, hi: Endpoint) -> Rod {
        self.z = Some((lo, hi));
        self
    }

    pub fn with_potential(mut self, omega: Vec<f64>) -> Rod {
        if let RodKind::Axis { potential, .. } = &mut self.kind {
            *potential = Some(omega);
        }
        self
    }

    pub fn structure(&self) -> Option<&IntVector> {
        match &self.kind {
            RodKind::Axis { structure, .. } => Some(structure),
            RodKind::Horizon => None,
        }
    }

    pub fn potential(&self) -> Option<&[f64]> {
        match &self.kind {
            RodKind::Axis { potential, .. } => potential.as_deref(),
            RodKind::Horizon => None,
        }
    }

    pub fn is_horizon(&self) -> bool {
        matches!(self.kind, RodKind::Horizon)
    }

    pub fn is_axis(&self) -> bool {
        !self.is_horizon()
    }
}

/// Two adjacent axis rods meeting at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Corner {
    pub left: usize,
    pub right: usize,
}

/// A horizon rod and its flanking axis rods.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HorizonSite {
    pub index: usize,
    pub before: usize,
    pub after: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RodDiagram {
    n: usize,
    shape: Shape,
    rods: Vec<Rod>,
}

pub fn int_from_json(v: &Value) -> Option<BigInt> {
    match v {
        Value::Number(x) => {
            x.as_i64().map(BigInt::from).or_else(|| x.as_u64().map(BigInt::from)).or_else(|| x.to_string().parse().ok())
        }
        Value::String(s) => s.parse().ok(),
        _ => None,
    }
}

pub fn int_to_json(x: &BigInt) -> Value {
    match x.to_i64() {
        Some(v) => json!(v),
        None => json!(x.to_string()),
    }
}

pub fn vector_to_json(v: &[BigInt]) -> Value {
    Value::Array(v.iter().map(int_to_json).collect())
}

impl RodDiagram {
    /// Build and validate a diagram.
    pub fn new(n: usize, shape: Shape, rods: Vec<Rod>) -> Result<Self, DiagramError> {
        let d = RodDiagram { n, shape, rods };
        d.validate()?;
        Ok(d)
    }

    pub fn parse(text: &str) -> Result<Self, DiagramError> {
        let value: Value = serde_json::from_str(text).map_err(|e| DiagramError::Schema(e.to_string()))?;
        Self::from_json(&value)
    }

    pub fn from_json(value: &Value) -> Result<Self, DiagramError> {
        let obj = value.as_object().ok_or_else(|| DiagramError::Schema("expected an object".into()))?;
        for key in obj.keys() {
            if !matches!(key.as_str(), "n" | "shape" | "rods") {
                return Err(DiagramError::Schema(format!("unknown field `{key}`")));
            }
        }
        let n = obj
            .get("n")
            .and_then(Value::as_u64)
            .ok_or_else(|| DiagramError::Schema("`n` must be a positive integer".into()))? as usize;
        let shape = match obj.get("shape").and_then(Value::as_str) {
            Some("half_plane") => Shape::HalfPlane,
            Some("disk") => Shape::Disk,
            _ => return Err(DiagramError::Schema("`shape` must be \"half_plane\" or \"disk\"".into())),
        };
        let rods_json = obj
            .get("rods")
            .and_then(Value::as_array)
            .ok_or_else(|| DiagramError::Schema("`rods` must be an array".into()))?;
        let rods = rods_json.iter().enumerate().map(|(i, r)| parse_rod(i, r)).collect::<Result<Vec<_>, _>>()?;
        Self::new(n, shape, rods)
    }

    pub fn to_json(&self) -> Value {
        let rods: Vec<Value> = self
            .rods
            .iter()
            .map(|rod| {
                let mut obj = serde_json::Map::new();
                match &rod.kind {
                    RodKind::Axis { raw, potential, .. } => {
                        obj.insert("kind".into(), json!("axis"));
                        obj.insert("v".into(), vector_to_json(raw));
                        if let Some(p) = potential {
                            obj.insert("potential".into(), json!(p));
                        }
                    }
                    RodKind::Horizon => {
                        obj.insert("kind".into(), json!("horizon"));
                    }
                }
                if let Some((lo, hi)) = rod.z {
                    obj.insert("z".into(), json!([lo.to_json(), hi.to_json()]));
                }
                Value::Object(obj)
            })
            .collect();
        json!({ "n": self.n, "shape": self.shape.as_str(), "rods": rods })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("diagram serializes")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn rods(&self) -> &[Rod] {
        &self.rods
    }

    pub fn rod(&self, i: usize) -> &Rod {
        &self.rods[i]
    }

    pub fn len(&self) -> usize {
        self.rods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rods.is_empty()
    }

    pub fn structure(&self, i: usize) -> Option<&IntVector> {
        self.rods[i].structure()
    }

    /// Indices of the axis rods, in order.
    pub fn axis_indices(&self) -> Vec<usize> {
        (0..self.rods.len()).filter(|&i| self.rods[i].is_axis()).collect()
    }

    pub fn axis_structures(&self) -> Vec<IntVector> {
        self.rods.iter().filter_map(|r| r.structure().cloned()).collect()
    }

    /// `n x m` matrix with the (sign-normalized) axis structures as columns.
    pub fn structure_matrix(&self) -> IntMatrix {
        let cols = self.axis_structures();
        if cols.is_empty() {
            return IntMatrix::zeros(self.n, 0);
        }
        IntMatrix::from_columns(&cols).expect("validated lengths")
    }

    pub fn has_geometry(&self) -> bool {
        self.rods.iter().all(|r| r.z.is_some())
    }

    /// Pairs of adjacent rods, cyclically for disks.
    fn adjacent_pairs(&self) -> Vec<(usize, usize)> {
        let m = self.rods.len();
        let mut pairs: Vec<(usize, usize)> = (0..m.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        if self.shape == Shape::Disk && m >= 2 {
            pairs.push((m - 1, 0));
        }
        pairs
    }

    pub fn corners(&self) -> Vec<Corner> {
        self.adjacent_pairs()
            .into_iter()
            .filter(|&(a, b)| self.rods[a].is_axis() && self.rods[b].is_axis())
            .map(|(left, right)| Corner { left, right })
            .collect()
    }

    pub fn horizons(&self) -> Vec<HorizonSite> {
        let m = self.rods.len();
        (0..m)
            .filter(|&i| self.rods[i].is_horizon())
            .filter_map(|i| {
                let (before, after) = match self.shape {
                    Shape::HalfPlane => (i.checked_sub(1)?, i + 1),
                    Shape::Disk => ((i + m - 1) % m, (i + 1) % m),
                };
                (after < m).then_some(HorizonSite { index: i, before, after })
            })
            .collect()
    }

    /// Maximal runs of consecutive axis rods. Disk runs may wrap around.
    pub fn axis_components(&self) -> Vec<Vec<usize>> {
        let m = self.rods.len();
        let mut comps: Vec<Vec<usize>> = Vec::new();
        let mut cur = Vec::new();
        for i in 0..m {
            if self.rods[i].is_axis() {
                cur.push(i);
            } else if !cur.is_empty() {
                comps.push(std::mem::take(&mut cur));
            }
        }
        if !cur.is_empty() {
            comps.push(cur);
        }
        if self.shape == Shape::Disk && comps.len() > 1 && self.rods[0].is_axis() && self.rods[m - 1].is_axis() {
            let first = comps.remove(0);
            comps.last_mut().expect("nonempty").extend(first);
        }
        comps
    }

    fn validate(&self) -> Result<(), DiagramError> {
        if self.n < 2 {
            return Err(DiagramError::Schema("`n` must be at least 2".into()));
        }
        if self.rods.is_empty() {
            return Err(DiagramError::Schema("a diagram needs at least one rod".into()));
        }
        for (i, rod) in self.rods.iter().enumerate() {
            if let RodKind::Axis { raw, potential, .. } = &rod.kind {
                if raw.len() != self.n {
                    return Err(rod_err(i, format!("structure has length {}, expected {}", raw.len(), self.n)));
                }
                if raw.iter().all(Zero::is_zero) {
                    return Err(rod_err(i, "structure is the zero vector"));
                }
                if !is_primitive_vector(raw)? {
                    return Err(rod_err(i, format!("structure {} is not primitive", format_vector(raw))));
                }
                if let Some(p) = potential {
                    if p.len() != self.n {
                        return Err(rod_err(i, format!("potential has length {}, expected {}", p.len(), self.n)));
                    }
                    if p.iter().any(|x| !x.is_finite()) {
                        return Err(rod_err(i, "potential constants must be finite"));
                    }
                }
            }
        }
        let m = self.rods.len();
        if self.shape == Shape::HalfPlane {
            if m < 2 {
                return Err(rod_err(0, "a half-plane diagram needs two semi-infinite axis rods"));
            }
            if self.rods[0].is_horizon() {
                return Err(rod_err(0, "first rod of a half-plane diagram must be an axis rod"));
            }
            if self.rods[m - 1].is_horizon() {
                return Err(rod_err(m - 1, "last rod of a half-plane diagram must be an axis rod"));
            }
        }
        for (a, b) in self.adjacent_pairs() {
            match (&self.rods[a].kind, &self.rods[b].kind) {
                (RodKind::Horizon, RodKind::Horizon) => {
                    return Err(DiagramError::AdjacentHorizons { left: a, right: b })
                }
                (
                    RodKind::Axis { structure: v, potential: pv, .. },
                    RodKind::Axis { structure: w, potential: pw, .. },
                ) => {
                    if v == w {
                        return Err(DiagramError::AdjacentEqual { left: a, right: b });
                    }
                    if let (Some(pv), Some(pw)) = (pv, pw) {
                        let close =
                            pv.iter().zip(pw).all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + x.abs().max(y.abs())));
                        if !close {
                            return Err(DiagramError::PotentialMismatch { left: a, right: b });
                        }
                    }
                }
                _ => {}
            }
        }
        self.validate_geometry()
    }

    fn validate_geometry(&self) -> Result<(), DiagramError> {
        let with_z = self.rods.iter().filter(|r| r.z.is_some()).count();
        if with_z == 0 {
            return Ok(());
        }
        let m = self.rods.len();
        if with_z != m {
            let i = self.rods.iter().position(|r| r.z.is_none()).expect("some rod lacks z");
            return Err(rod_err(i, "z-interval missing while other rods carry one"));
        }
        for (i, rod) in self.rods.iter().enumerate() {
            let (lo, hi) = rod.z.expect("checked");
            if lo.order_key() >= hi.order_key() {
                return Err(rod_err(i, "z-interval must have positive length"));
            }
            let first = i == 0 && self.shape == Shape::HalfPlane;
            let last = i == m - 1 && self.shape == Shape::HalfPlane;
            let lo_ok = if first { lo == Endpoint::NegInf } else { lo.finite().is_some() };
            let hi_ok = if last { hi == Endpoint::PosInf } else { hi.finite().is_some() };
            if !lo_ok || !hi_ok {
                return Err(rod_err(i, "only the outer rods of a half-plane diagram may be semi-infinite"));
            }
            if i + 1 < m {
                let (next_lo, _) = self.rods[i + 1].z.expect("checked");
                if next_lo != hi {
                    return Err(rod_err(i + 1, "z-interval does not start where the previous rod ends"));
                }
            }
        }
        Ok(())
    }
}

fn parse_rod(index: usize, value: &Value) -> Result<Rod, DiagramError> {
    let obj = value.as_object().ok_or_else(|| rod_err(index, "rod must be an object"))?;
    let kind = obj.get("kind").and_then(Value::as_str).ok_or_else(|| rod_err(index, "missing `kind`"))?;
    let allowed: &[&str] = match kind {
        "axis" => &["kind", "v", "z", "potential"],
        "horizon" => &["kind", "z"],
        other => return Err(rod_err(index, format!("unknown rod kind `{other}`"))),
    };
    if let Some(key) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(rod_err(index, format!("unexpected field `{key}`")));
    }
    let z = match obj.get("z") {
        None => None,
        Some(Value::Array(ends)) if ends.len() == 2 => {
            let lo = Endpoint::from_json(&ends[0]).ok_or_else(|| rod_err(index, "bad lower z endpoint"))?;
            let hi = Endpoint::from_json(&ends[1]).ok_or_else(|| rod_err(index, "bad upper z endpoint"))?;
            Some((lo, hi))
        }
        Some(_) => return Err(rod_err(index, "`z` must be a two-element array")),
    };
    let mut rod = if kind == "axis" {
        let v = obj
            .get("v")
            .and_then(Value::as_array)
            .ok_or_else(|| rod_err(index, "axis rod needs an integer vector `v`"))?;
        let v = v
            .iter()
            .map(int_from_json)
            .collect::<Option<IntVector>>()
            .ok_or_else(|| rod_err(index, "`v` entries must be integers"))?;
        let mut rod = Rod::axis(v);
        if let Some(p) = obj.get("potential") {
            let p = p
                .as_array()
                .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>())
                .ok_or_else(|| rod_err(index, "`potential` must be an array of numbers"))?;
            rod = rod.with_potential(p);
        }
        rod
    } else {
        Rod::horizon()
    };
    rod.z = z;
    Ok(rod)
}

impl fmt::Display for RodDiagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} diagram, n = {}", self.shape.as_str(), self.n)?;
        let m = self.rods.len();
        for (i, rod) in self.rods.iter().enumerate() {
            let label = match rod.structure() {
                Some(v) => format!("axis {}", format_vector(v)),
                None => "horizon ~~~~".to_string(),
            };
            let z = match rod.z {
                Some((lo, hi)) => format!("  z in [{}, {}]", fmt_endpoint(lo), fmt_endpoint(hi)),
                None => String::new(),
            };
            writeln!(f, "  [{i}] {label}{z}")?;
            let next = if i + 1 < m {
                Some(i + 1)
            } else if self.shape == Shape::Disk && m >= 2 {
                Some(0)
            } else {
                None
            };
            if let Some(j) = next {
                if rod.is_axis() && self.rods[j].is_axis() {
                    writeln!(f, "      * corner")?;
                }
            }
        }
        Ok(())
    }
}

fn fmt_endpoint(e: Endpoint) -> String {
    match e {
        Endpoint::NegInf => "-inf".into(),
        Endpoint::PosInf => "+inf".into(),
        Endpoint::Finite(x) => format!("{x}"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CornerClass {
    Admissible,
    Inadmissible { det2: u64 },
}

/// A corner is admissible when `Det_2(v, w) = 1`.
pub fn classify_corner(v: &[BigInt], w: &[BigInt]) -> Result<(CornerClass, BigInt), DiagramError> {
    let d = det2(v, w)?;
    if d.is_zero() {
        return Err(DiagramError::Parallel);
    }
    let class = if d.is_one() {
        CornerClass::Admissible
    } else {
        CornerClass::Inadmissible { det2: d.to_u64().unwrap_or(u64::MAX) }
    };
    Ok((class, d))
}

/// Closed orientable three-manifolds occurring as rod cross-sections and
/// plumbing bases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ThreeManifold {
    S3,
    Lens { p: BigInt, q: BigInt },
    S1xS2,
}

impl ThreeManifold {
    pub fn label(&self) -> String {
        match self {
            ThreeManifold::S3 => "S³".into(),
            ThreeManifold::Lens { p, q } => format!("L({p},{q})"),
            ThreeManifold::S1xS2 => "S¹×S²".into(),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            ThreeManifold::S3 => json!({ "kind": "S3" }),
            ThreeManifold::Lens { p, q } => json!({ "kind": "lens", "p": int_to_json(p), "q": int_to_json(q) }),
            ThreeManifold::S1xS2 => json!({ "kind": "S1xS2" }),
        }
    }
}

pub(crate) fn superscript(k: usize) -> String {
    const DIGITS: [char; 10] = ['⁰', '¹', '²', '³', '⁴', '⁵', '⁶', '⁷', '⁸', '⁹'];
    k.to_string().chars().map(|c| DIGITS[c.to_digit(10).expect("digit") as usize]).collect()
}

/// `×S¹`, `×T²`, ... or nothing for `k = 0`.
pub(crate) fn torus_suffix(k: usize) -> String {
    match k {
        0 => String::new(),
        1 => "×S¹".into(),
        k => format!("×T{}", superscript(k)),
    }
}

/// A three-manifold times a torus factor `T^k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossSection {
    pub base: ThreeManifold,
    pub torus_factor: usize,
}

impl CrossSection {
    /// `S¹×S²×T^k` is written `S²×T^{k+1}`.
    pub fn label(&self) -> String {
        match (&self.base, self.torus_factor) {
            (ThreeManifold::S1xS2, k) if k > 0 => format!("S²{}", torus_suffix(k + 1)),
            (base, k) => format!("{}{}", base.label(), torus_suffix(k)),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({ "base": self.base.to_json(), "torus_factor": self.torus_factor, "label": self.label() })
    }
}

impl fmt::Display for CrossSection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Topology of the cross-section of a horizon or end flanked by `v` and `w`.
pub fn cross_section_topology(v: &[BigInt], w: &[BigInt]) -> Result<CrossSection, DiagramError> {
    let n = v.len();
    if w.len() != n {
        return Err(IntLinError::DimensionMismatch("structures of unequal length".into()).into());
    }
    if n < 2 {
        return Err(DiagramError::Schema("cross-sections need n >= 2".into()));
    }
    for (i, x) in [v, w].into_iter().enumerate() {
        if !is_primitive_vector(x)? {
            return Err(rod_err(i, format!("structure {} is not primitive", format_vector(x))));
        }
    }
    let torus_factor = n - 2;
    let d = det2(v, w)?;
    let base = if d.is_zero() {
        ThreeManifold::S1xS2
    } else if d.is_one() {
        ThreeManifold::S3
    } else {
        let m = IntMatrix::from_columns(&[v.to_vec(), w.to_vec()])?;
        let h = hermite_normal_form(&m).h;
        debug_assert_eq!(*h.get(1, 1), d);
        ThreeManifold::Lens { p: d, q: h.get(0, 1).clone() }
    };
    Ok(CrossSection { base, torus_factor })
}

/// Cross-section of the asymptotic end, from the two semi-infinite rods.
pub fn asymptotic_end(d: &RodDiagram) -> Result<CrossSection, DiagramError> {
    if d.shape() != Shape::HalfPlane {
        return Err(DiagramError::WrongShape { expected: "half-plane" });
    }
    let first = d.structure(0).expect("validated half-plane");
    let last = d.structure(d.len() - 1).expect("validated half-plane");
    cross_section_topology(first, last)
}

/// Cross-sections of all horizons, keyed by rod index.
pub fn horizon_topologies(d: &RodDiagram) -> Result<Vec<(usize, CrossSection)>, DiagramError> {
    d.horizons()
        .into_iter()
        .map(|h| {
            let v = d.structure(h.before).expect("validated neighbour");
            let w = d.structure(h.after).expect("validated neighbour");
            Ok((h.index, cross_section_topology(v, w)?))
        })
        .collect()
}

/// Search for a single unimodular `Q` with `Q v_i = ±w_i` for every axis rod.
/// Returns `None` when the diagrams have the same layout but are not equivalent.
pub fn diagram_equivalent(a: &RodDiagram, b: &RodDiagram) -> Result<Option<IntMatrix>, DiagramError> {
    if a.n() != b.n() || a.shape() != b.shape() {
        return Err(DiagramError::Incompatible("dimension or shape differs".into()));
    }
    let kinds = |d: &RodDiagram| d.rods().iter().map(Rod::is_axis).collect::<Vec<_>>();
    if kinds(a) != kinds(b) {
        return Err(DiagramError::Incompatible("rod kind sequences differ".into()));
    }
    let left = a.axis_structures();
    let right = b.axis_structures();
    if left.is_empty() {
        return Ok(Some(IntMatrix::identity(a.n())));
    }
    let target = hermite_normal_form(&IntMatrix::from_columns(&right)?);
    let mut signed = Vec::with_capacity(left.len());
    if !sign_search(&left, &target.h, &mut signed)? {
        return Ok(None);
    }
    let source = hermite_normal_form(&IntMatrix::from_columns(&signed)?);
    let q = target.q.inverse_unimodular()?.checked_mul(&source.q)?;
    Ok(Some(q))
}

/// Extend `signed` column by column, keeping the Hermite prefix equal to the target's.
fn sign_search(cols: &[IntVector], target: &IntMatrix, signed: &mut Vec<IntVector>) -> Result<bool, DiagramError> {
    let j = signed.len();
    if j == cols.len() {
        return Ok(true);
    }
    let candidates = [cols[j].clone(), cols[j].iter().map(|x| -x).collect::<IntVector>()];
    for cand in candidates {
        signed.push(cand);
        let h = hermite_normal_form(&IntMatrix::from_columns(signed)?).h;
        if h.column(j) == target.column(j) && sign_search(cols, target, signed)? {
            return Ok(true);
        }
        signed.pop();
    }
    Ok(false)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityNormalization {
    /// `A = [[q, -p], [-n, m]]` for `v1 = (m, n)`, `v2 = (p, q)` after sign fixing.
    pub transform: IntMatrix,
    /// Sign-fixed input triple.
    pub signed: [IntVector; 3],
    /// Image of the triple, `{(1,0), (0,1), (r', s')}`.
    pub image: [IntVector; 3],
    /// `m r (mq - np)(ps - rq)` evaluated on the image.
    pub inequality_value: BigInt,
}

impl CompatibilityNormalization {
    pub fn inequality_holds(&self) -> bool {
        !self.inequality_value.is_positive()
    }
}

/// Bring three consecutive two-dimensional structures into the normal form
/// `(1,0), (0,1), (r', s')`.
pub fn normalize_compatibility(
    v1: &[BigInt],
    v2: &[BigInt],
    v3: &[BigInt],
) -> Result<CompatibilityNormalization, DiagramError> {
    if [v1, v2, v3].iter().any(|v| v.len() != 2) {
        return Err(IntLinError::DimensionMismatch("compatibility needs vectors in Z^2".into()).into());
    }
    let det = |a: &[BigInt], b: &[BigInt]| &a[0] * &b[1] - &a[1] * &b[0];
    let neg = |a: &[BigInt]| a.iter().map(|x| -x).collect::<IntVector>();
    let a = v1.to_vec();
    let mut b = v2.to_vec();
    let d12 = det(&a, &b);
    if d12.abs() != BigInt::one() {
        return Err(DiagramError::Incompatible("first corner is not admissible".into()));
    }
    if d12.is_negative() {
        b = neg(&b);
    }
    let mut c = v3.to_vec();
    let d23 = det(&b, &c);
    if d23.abs() != BigInt::one() {
        return Err(DiagramError::Incompatible("second corner is not admissible".into()));
    }
    if d23.is_negative() {
        c = neg(&c);
    }
    let (m, nn) = (&a[0], &a[1]);
    let (p, q) = (&b[0], &b[1]);
    let transform = IntMatrix::from_rows(&[vec![q.clone(), -p], vec![-nn, m.clone()]])?;
    let image = [transform.mul_vec(&a)?, transform.mul_vec(&b)?, transform.mul_vec(&c)?];
    let [x, y, z] = &image;
    let value = &x[0] * &z[0] * det(x, y) * det(y, z);
    Ok(CompatibilityNormalization { transform, signed: [a, b, c], image, inequality_value: value })
}
