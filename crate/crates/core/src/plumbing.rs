//! Toric plumbings: chains of disk bundles over lens spaces encoded by
//! `(q, r, p)` triples and plumbing vectors, and the decomposition of the
//! domain of outer communication into cylinders, corner balls and plumbings.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};
use thiserror::Error;

use crate::intlin::{
    det2, det_k, format_vector, hermite_normal_form, is_hermite_normal_form, is_primitive_vector, unit_vector,
    IntLinError, IntMatrix, IntVector,
};
use crate::roddiagram::{
    asymptotic_end, int_to_json, torus_suffix, vector_to_json, CrossSection, DiagramError, RodDiagram, Shape,
    ThreeManifold,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlumbingError {
    #[error("toric plumbings need n >= 3, got {0}")]
    DimensionTooSmall(usize),
    #[error("a component needs at least three rods, got {0}")]
    TooFewRods(usize),
    #[error("structures {index} and {} do not form an admissible pair (Det_2 = {det})", index + 1)]
    Inadmissible { index: usize, det: BigInt },
    #[error("structure {0} is not primitive")]
    NotPrimitive(usize),
    #[error("invalid bundle data (q, r, p) = ({q}, {r}, {p})")]
    InvalidBundle { q: BigInt, r: BigInt, p: BigInt },
    #[error("expected {expected} plumbing vectors, got {got}")]
    VectorCount { expected: usize, got: usize },
    #[error("vectors of unequal length")]
    Length,
    #[error("third structure is inconsistent with (q, r, p): {0}")]
    Inconsistent(String),
    #[error("plumbing relations fail: {0}")]
    RelationsFailed(String),
    #[error(transparent)]
    Diagram(#[from] DiagramError),
    #[error(transparent)]
    IntLin(#[from] IntLinError),
}

/// A disk bundle over `S³`, a lens space or `S¹×S²`, times `T^{n-3}`.
///
/// `p = 0` is the `S¹×S²` case (with `q = 1`), `p = 1` is `S³`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bundle {
    pub q: BigInt,
    pub r: BigInt,
    pub p: BigInt,
    pub torus_factor: usize,
}

impl Bundle {
    pub fn new(q: BigInt, r: BigInt, p: BigInt, torus_factor: usize) -> Result<Self, PlumbingError> {
        let b = Bundle { q, r, p, torus_factor };
        b.check()?;
        Ok(b)
    }

    pub fn from_i64(q: i64, r: i64, p: i64, torus_factor: usize) -> Result<Self, PlumbingError> {
        Self::new(q.into(), r.into(), p.into(), torus_factor)
    }

    fn check(&self) -> Result<(), PlumbingError> {
        let bad = || PlumbingError::InvalidBundle { q: self.q.clone(), r: self.r.clone(), p: self.p.clone() };
        if self.p.is_negative() {
            return Err(bad());
        }
        if self.p.is_zero() {
            return if self.q.is_one() { Ok(()) } else { Err(bad()) };
        }
        let in_range = |x: &BigInt| !x.is_negative() && x < &self.p;
        if !in_range(&self.q) || !in_range(&self.r) || !self.q.gcd(&self.p).is_one() {
            return Err(bad());
        }
        Ok(())
    }

    pub fn base(&self) -> ThreeManifold {
        if self.p.is_zero() {
            ThreeManifold::S1xS2
        } else if self.p.is_one() {
            ThreeManifold::S3
        } else {
            ThreeManifold::Lens { p: self.p.clone(), q: self.q.clone() }
        }
    }

    pub fn euler(&self) -> &BigInt {
        &self.r
    }

    pub fn label(&self) -> String {
        format!("D²-bundle over {} (euler {}){}", self.base().label(), self.r, torus_suffix(self.torus_factor))
    }

    pub fn to_json(&self) -> Value {
        json!({
            "q": int_to_json(&self.q),
            "r": int_to_json(&self.r),
            "p": int_to_json(&self.p),
            "base": self.base().to_json(),
            "base_label": self.base().label(),
            "euler": int_to_json(&self.r),
            "torus_factor": self.torus_factor,
        })
    }
}

impl fmt::Display for Bundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} e{}", self.base().label(), self.r)
    }
}

fn neg(v: &[BigInt]) -> IntVector {
    v.iter().map(|x| -x).collect()
}

/// Hermite data of an admissible triple, with the third vector's sign fixed
/// when the triple is dependent.
fn triple_data(v1: &[BigInt], v2: &[BigInt], v3: &[BigInt]) -> Result<(Bundle, bool), PlumbingError> {
    let n = v1.len();
    if v2.len() != n || v3.len() != n {
        return Err(PlumbingError::Length);
    }
    if n < 3 {
        return Err(PlumbingError::DimensionTooSmall(n));
    }
    for (i, (a, b)) in [(v1, v2), (v2, v3)].into_iter().enumerate() {
        let d = det2(a, b)?;
        if !d.is_one() {
            return Err(PlumbingError::Inadmissible { index: i, det: d });
        }
    }
    let m = IntMatrix::from_columns(&[v1.to_vec(), v2.to_vec(), v3.to_vec()])?;
    let h = hermite_normal_form(&m).h;
    let third = h.column(2);
    let torus_factor = n - 3;
    if !third[2].is_zero() {
        let b = Bundle::new(third[0].clone(), third[1].clone(), third[2].clone(), torus_factor)?;
        return Ok((b, false));
    }
    // Dependent triple: v3 = a v1 + b v2 with |a| = 1.
    let flipped = third[0].is_negative();
    let r = if flipped { -&third[1] } else { third[1].clone() };
    Ok((Bundle::new(BigInt::one(), r, BigInt::zero(), torus_factor)?, flipped))
}

/// Bundle `(q, r, p)` encoded by three consecutive structures.
pub fn triple_to_bundle(v1: &[BigInt], v2: &[BigInt], v3: &[BigInt]) -> Result<Bundle, PlumbingError> {
    Ok(triple_data(v1, v2, v3)?.0)
}

/// Plumbing vector with `w'' = q w + r w' + p 𝔭` (`0` when `p = 0`).
pub fn plumbing_vector(
    w: &[BigInt],
    w1: &[BigInt],
    w2: &[BigInt],
    q: &BigInt,
    r: &BigInt,
    p: &BigInt,
) -> Result<IntVector, PlumbingError> {
    let n = w.len();
    if w1.len() != n || w2.len() != n {
        return Err(PlumbingError::Length);
    }
    let rest: IntVector = (0..n).map(|i| &w2[i] - q * &w[i] - r * &w1[i]).collect();
    if p.is_zero() {
        if rest.iter().any(|x| !x.is_zero()) {
            return Err(PlumbingError::Inconsistent(format!("p = 0 but {} is not {q}·w + {r}·w'", format_vector(w2))));
        }
        return Ok(rest);
    }
    if rest.iter().any(|x| !x.is_multiple_of(p)) {
        return Err(PlumbingError::Inconsistent(format!("{} is not divisible by p = {p}", format_vector(&rest))));
    }
    let vec: IntVector = rest.iter().map(|x| x / p).collect();
    let d3 = det_k(&[w.to_vec(), w1.to_vec(), vec.clone()])?;
    if !d3.is_one() {
        return Err(PlumbingError::Inconsistent(format!("Det_3 of the primitivity triple is {d3}")));
    }
    Ok(vec)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToricPlumbing {
    pub n: usize,
    pub bundles: Vec<Bundle>,
    /// `𝔭_2, ..., 𝔭_l`; `𝔭_1` is `e_3` (or `0`) by construction.
    pub vectors: Vec<IntVector>,
    /// Structures after sign fixing and reduction to Hermite form.
    pub hermite_rods: Vec<IntVector>,
    /// `Q` with `Q * signed input = hermite_rods`.
    pub transform: IntMatrix,
    /// Inputs whose sign was flipped to put a dependent triple in standard form.
    pub flipped: Vec<bool>,
}

impl ToricPlumbing {
    pub fn to_json(&self) -> Value {
        json!({
            "bundles": self.bundles.iter().enumerate().map(|(i, b)| {
                let mut v = b.to_json();
                v["index"] = json!(i + 1);
                v
            }).collect::<Vec<_>>(),
            "plumbing_vectors": self.vectors.iter().enumerate().map(|(i, p)| {
                json!({ "index": i + 2, "vector": vector_to_json(p) })
            }).collect::<Vec<_>>(),
            "hermite_rods": self.hermite_rods.iter().map(|v| vector_to_json(v)).collect::<Vec<_>>(),
            "flipped": self.flipped,
        })
    }
}

/// Decompose an axis component with at least three rods into a toric plumbing.
pub fn decompose_component(structures: &[IntVector]) -> Result<ToricPlumbing, PlumbingError> {
    let l = structures.len();
    if l < 3 {
        return Err(PlumbingError::TooFewRods(l));
    }
    let n = structures[0].len();
    if structures.iter().any(|v| v.len() != n) {
        return Err(PlumbingError::Length);
    }
    if n < 3 {
        return Err(PlumbingError::DimensionTooSmall(n));
    }
    for (i, v) in structures.iter().enumerate() {
        if !is_primitive_vector(v)? {
            return Err(PlumbingError::NotPrimitive(i));
        }
    }
    for i in 0..l - 1 {
        let d = det2(&structures[i], &structures[i + 1])?;
        if !d.is_one() {
            return Err(PlumbingError::Inadmissible { index: i, det: d });
        }
    }
    let mut signed = structures.to_vec();
    let mut flipped = vec![false; l];
    let mut hf = hermite_normal_form(&IntMatrix::from_columns(&signed)?);
    for i in 0..l - 2 {
        let w = hf.h.columns();
        let (_, flip) = triple_data(&w[i], &w[i + 1], &w[i + 2])?;
        if flip {
            signed[i + 2] = neg(&signed[i + 2]);
            flipped[i + 2] = true;
            hf = hermite_normal_form(&IntMatrix::from_columns(&signed)?);
        }
    }
    let w = hf.h.columns();
    let mut bundles = Vec::with_capacity(l - 2);
    let mut vectors = Vec::with_capacity(l - 3);
    for i in 0..l - 2 {
        let b = triple_to_bundle(&w[i], &w[i + 1], &w[i + 2])?;
        if i > 0 {
            vectors.push(plumbing_vector(&w[i], &w[i + 1], &w[i + 2], &b.q, &b.r, &b.p)?);
        }
        bundles.push(b);
    }
    Ok(ToricPlumbing { n, bundles, vectors, hermite_rods: w, transform: hf.q, flipped })
}

/// Run the recursion `w_{i+2} = q_i w_i + r_i w_{i+1} + p_i 𝔭_i` from `e_1, e_2`.
pub fn generate_rods(bundles: &[Bundle], vectors: &[IntVector], n: usize) -> Result<Vec<IntVector>, PlumbingError> {
    if n < 3 {
        return Err(PlumbingError::DimensionTooSmall(n));
    }
    if bundles.is_empty() {
        return Err(PlumbingError::TooFewRods(2));
    }
    if vectors.len() + 1 != bundles.len() {
        return Err(PlumbingError::VectorCount { expected: bundles.len() - 1, got: vectors.len() });
    }
    if vectors.iter().any(|v| v.len() != n) {
        return Err(PlumbingError::Length);
    }
    let full = full_vectors(bundles, vectors, n);
    let mut w = vec![unit_vector(n, 0), unit_vector(n, 1)];
    for (i, b) in bundles.iter().enumerate() {
        let next: IntVector = (0..n).map(|j| &b.q * &w[i][j] + &b.r * &w[i + 1][j] + &b.p * &full[i][j]).collect();
        w.push(next);
    }
    Ok(w)
}

fn full_vectors(bundles: &[Bundle], vectors: &[IntVector], n: usize) -> Vec<IntVector> {
    let first = if bundles[0].p.is_zero() { vec![BigInt::zero(); n] } else { unit_vector(n, 2) };
    std::iter::once(first).chain(vectors.iter().cloned()).collect()
}

/// Rod structures of the plumbing, checked against all relations.
pub fn plumbing_to_rods(bundles: &[Bundle], vectors: &[IntVector], n: usize) -> Result<Vec<IntVector>, PlumbingError> {
    let report = verify_plumbing_relations(bundles, vectors, n)?;
    if let Some(bad) = report.first_failure() {
        return Err(PlumbingError::RelationsFailed(bad.detail.clone()));
    }
    Ok(report.rods)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    BundleData,
    VectorPrimitivity,
    Admissibility,
    TriplePrimitivity,
    Zeros,
    PivotBound,
    HermiteForm,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::BundleData => "bundle_data",
            Relation::VectorPrimitivity => "vector_primitivity",
            Relation::Admissibility => "admissibility",
            Relation::TriplePrimitivity => "triple_primitivity",
            Relation::Zeros => "zeros",
            Relation::PivotBound => "pivot_bound",
            Relation::HermiteForm => "hermite_form",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationCheck {
    pub relation: Relation,
    /// 1-based index of the bundle or plumbing vector concerned.
    pub index: Option<usize>,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlumbingReport {
    pub checks: Vec<RelationCheck>,
    pub rods: Vec<IntVector>,
}

impl PlumbingReport {
    pub fn is_valid(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&RelationCheck> {
        self.checks.iter().find(|c| !c.passed)
    }

    pub fn failures(&self, relation: Relation) -> usize {
        self.checks.iter().filter(|c| c.relation == relation && !c.passed).count()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "valid": self.is_valid(),
            "checks": self.checks.iter().map(|c| json!({
                "relation": c.relation.as_str(),
                "index": c.index,
                "passed": c.passed,
                "detail": c.detail,
            })).collect::<Vec<_>>(),
            "rods": self.rods.iter().map(|v| vector_to_json(v)).collect::<Vec<_>>(),
        })
    }
}

fn last_nonzero(v: &[BigInt]) -> Option<usize> {
    v.iter().rposition(|x| !x.is_zero())
}

/// Evaluate every plumbing relation and report each outcome.
pub fn verify_plumbing_relations(
    bundles: &[Bundle],
    vectors: &[IntVector],
    n: usize,
) -> Result<PlumbingReport, PlumbingError> {
    let mut checks = Vec::new();
    let mut push =
        |relation, index, passed, detail: String| checks.push(RelationCheck { relation, index, passed, detail });
    for (i, b) in bundles.iter().enumerate() {
        let ok = b.check().is_ok() && b.torus_factor + 3 == n;
        push(Relation::BundleData, Some(i + 1), ok, format!("bundle {} = (q,r,p) = ({},{},{})", i + 1, b.q, b.r, b.p));
    }
    let w = generate_rods(bundles, vectors, n)?;
    let full = full_vectors(bundles, vectors, n);

    for k in 1..bundles.len() {
        let v = &full[k];
        let zero = v.iter().all(Zero::is_zero);
        let (ok, detail) = if bundles[k].p.is_zero() {
            (zero, format!("𝔭_{} = {} must vanish when p = 0", k + 1, format_vector(v)))
        } else {
            (!zero && is_primitive_vector(v)?, format!("𝔭_{} = {} must be primitive", k + 1, format_vector(v)))
        };
        push(Relation::VectorPrimitivity, Some(k + 1), ok, detail);
    }

    for (k, b) in bundles.iter().enumerate() {
        let generated: IntVector = (0..n).map(|j| &b.q * &w[k][j] + &b.p * &full[k][j]).collect();
        let d = det2(&w[k + 1], &generated)?;
        push(
            Relation::Admissibility,
            Some(k + 1),
            d.is_one(),
            format!("Det_2(w_{}, q·w_{} + p·𝔭_{}) = {d}", k + 2, k + 1, k + 1),
        );
    }

    for (k, b) in bundles.iter().enumerate() {
        if b.p.is_zero() || full[k].iter().all(Zero::is_zero) {
            continue;
        }
        let d = det_k(&[w[k].clone(), w[k + 1].clone(), full[k].clone()])?;
        push(
            Relation::TriplePrimitivity,
            Some(k + 1),
            d.is_one(),
            format!("Det_3(w_{}, w_{}, 𝔭_{}) = {d}", k + 1, k + 2, k + 1),
        );
    }

    for k in 1..bundles.len() {
        let support = full[..k].iter().filter_map(|v| last_nonzero(v)).max();
        let bound = support.unwrap_or(1).max(1) + 1;
        let ok = last_nonzero(&full[k]).is_none_or(|m| m <= bound);
        push(
            Relation::Zeros,
            Some(k + 1),
            ok,
            format!("𝔭_{} may only extend one entry past the earlier vectors", k + 1),
        );
    }

    for k in 1..bundles.len() {
        let Some(m) = last_nonzero(&full[k]) else { continue };
        // Rows 1 and 2 hold the pivots of e_1, e_2; earlier rows are taken too.
        let prior = full[..k].iter().filter_map(|v| last_nonzero(v)).max();
        if m < 2 || prior.is_some_and(|s| m <= s) {
            continue;
        }
        let col = &w[k + 2];
        let pivot = &col[m];
        let ok = (0..m).all(|j| !col[j].is_negative() && &col[j] < pivot);
        push(
            Relation::PivotBound,
            Some(k + 1),
            ok,
            format!("entries of w_{} above row {} must lie in [0, {pivot})", k + 3, m + 1),
        );
    }

    let hermite = is_hermite_normal_form(&IntMatrix::from_columns(&w)?);
    push(Relation::HermiteForm, None, hermite, "generated structures are in Hermite normal form".into());
    Ok(PlumbingReport { checks, rods: w })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Piece {
    Cylinder { rod: usize },
    CornerBall { rods: [usize; 2] },
    Plumbing { rods: Vec<usize>, plumbing: ToricPlumbing },
}

impl Piece {
    pub fn kind(&self) -> &'static str {
        match self {
            Piece::Cylinder { .. } => "cylinder",
            Piece::CornerBall { .. } => "corner_ball",
            Piece::Plumbing { .. } => "plumbing",
        }
    }

    pub fn rods(&self) -> Vec<usize> {
        match self {
            Piece::Cylinder { rod } => vec![*rod],
            Piece::CornerBall { rods } => rods.to_vec(),
            Piece::Plumbing { rods, .. } => rods.clone(),
        }
    }

    pub fn label(&self, n: usize) -> String {
        match self {
            Piece::Cylinder { .. } => format!("[0,1]×D²{}", torus_suffix(n - 1)),
            Piece::CornerBall { .. } => format!("B⁴{}", torus_suffix(n - 2)),
            Piece::Plumbing { .. } => "toric plumbing".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocDecomposition {
    pub n: usize,
    pub pieces: Vec<Piece>,
    pub end: CrossSection,
    /// Single semi-infinite rods absorbed into the end.
    pub absorbed: Vec<usize>,
}

impl DocDecomposition {
    pub fn count(&self, kind: &str) -> usize {
        self.pieces.iter().filter(|p| p.kind() == kind).count()
    }

    pub fn end_label(&self) -> String {
        format!("R₊×{}", self.end.label())
    }

    pub fn to_json(&self) -> Value {
        let pieces: Vec<Value> = self
            .pieces
            .iter()
            .map(|p| {
                let mut v = json!({ "kind": p.kind(), "topology": p.label(self.n), "rods": p.rods() });
                if let Piece::Plumbing { plumbing, .. } = p {
                    v["plumbing"] = plumbing.to_json();
                }
                v
            })
            .collect();
        json!({
            "n": self.n,
            "pieces": pieces,
            "end": { "topology": self.end_label(), "cross_section": self.end.to_json(), "absorbed_rods": self.absorbed },
            "counts": {
                "plumbing": self.count("plumbing"),
                "cylinder": self.count("cylinder"),
                "corner_ball": self.count("corner_ball"),
                "J": self.count("plumbing"),
                "N1": self.count("cylinder"),
                "N2": self.count("corner_ball"),
            },
        })
    }
}

impl fmt::Display for DocDecomposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.pieces {
            writeln!(f, "{:<12} rods {:?}  {}", p.kind(), p.rods(), p.label(self.n))?;
            if let Piece::Plumbing { plumbing, .. } = p {
                let bundles: Vec<String> = plumbing.bundles.iter().map(ToString::to_string).collect();
                writeln!(f, "             bundles [{}]", bundles.join(", "))?;
                for (i, v) in plumbing.vectors.iter().enumerate() {
                    writeln!(f, "             𝔭_{} = {}", i + 2, format_vector(v))?;
                }
            }
        }
        writeln!(f, "{:<12} {}", "end", self.end_label())?;
        write!(
            f,
            "counts: plumbing {}, cylinder {}, corner_ball {}",
            self.count("plumbing"),
            self.count("cylinder"),
            self.count("corner_ball")
        )
    }
}

/// Split a half-plane diagram at its horizons and decompose each axis component.
pub fn doc_decomposition(d: &RodDiagram) -> Result<DocDecomposition, PlumbingError> {
    if d.shape() != Shape::HalfPlane {
        return Err(DiagramError::WrongShape { expected: "half-plane" }.into());
    }
    let n = d.n();
    if n < 3 {
        return Err(PlumbingError::DimensionTooSmall(n));
    }
    for c in d.corners() {
        let det = det2(d.structure(c.left).expect("axis"), d.structure(c.right).expect("axis"))?;
        if !det.is_one() {
            return Err(PlumbingError::Inadmissible { index: c.left, det });
        }
    }
    let last = d.len() - 1;
    let mut pieces = Vec::new();
    let mut absorbed = Vec::new();
    for comp in d.axis_components() {
        match comp.as_slice() {
            [rod] if *rod == 0 || *rod == last => absorbed.push(*rod),
            [rod] => pieces.push(Piece::Cylinder { rod: *rod }),
            [a, b] => pieces.push(Piece::CornerBall { rods: [*a, *b] }),
            rods => {
                let structures: Vec<IntVector> = rods.iter().map(|&i| d.structure(i).expect("axis").clone()).collect();
                let plumbing = decompose_component(&structures)?;
                pieces.push(Piece::Plumbing { rods: rods.to_vec(), plumbing });
            }
        }
    }
    Ok(DocDecomposition { n, pieces, end: asymptotic_end(d)?, absorbed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intlin::int_vec;

    fn b(q: i64, r: i64, p: i64) -> Bundle {
        Bundle::from_i64(q, r, p, 0).unwrap()
    }

    #[test]
    fn triple_examples() {
        let t = triple_to_bundle(&int_vec(&[1, 0, 0]), &int_vec(&[0, 1, 0]), &int_vec(&[2, 3, 5])).unwrap();
        assert_eq!(t, b(2, 3, 5));
        assert_eq!(t.base(), ThreeManifold::Lens { p: 5.into(), q: 2.into() });
        let dep = triple_to_bundle(&int_vec(&[1, 0, 0]), &int_vec(&[0, 1, 0]), &int_vec(&[-1, 4, 0])).unwrap();
        assert_eq!(dep, b(1, -4, 0));
        assert_eq!(dep.base(), ThreeManifold::S1xS2);
        let e = triple_to_bundle(&int_vec(&[1, 0, 0]), &int_vec(&[1, 2, 0]), &int_vec(&[0, 0, 1])).unwrap_err();
        assert!(matches!(e, PlumbingError::Inadmissible { index: 0, .. }));
    }

    #[test]
    fn plumbing_vector_examples() {
        let (w, w1) = (int_vec(&[0, 1, 0]), int_vec(&[2, 3, 5]));
        let (q, r, p) = (3.into(), 2.into(), 7.into());
        assert_eq!(plumbing_vector(&w, &w1, &int_vec(&[11, 9, 24]), &q, &r, &p).unwrap(), int_vec(&[1, 0, 2]));
        assert_eq!(plumbing_vector(&w, &w1, &int_vec(&[-3, 9, -11]), &q, &r, &p).unwrap(), int_vec(&[-1, 0, -3]));
        assert!(plumbing_vector(&w, &w1, &int_vec(&[11, 9, 25]), &q, &r, &p).is_err());
    }

    #[test]
    fn lens_plumbing_component() {
        let s = [int_vec(&[1, 0, 0]), int_vec(&[0, 1, 0]), int_vec(&[2, 1, 5]), int_vec(&[2, 1, 4])];
        let tp = decompose_component(&s).unwrap();
        assert_eq!(tp.bundles, vec![b(2, 1, 5), b(1, 0, 2)]);
        assert_eq!(tp.vectors, vec![int_vec(&[1, 0, 2])]);
        assert_eq!(tp.bundles[0].to_string(), "L(5,2) e1");
        assert_eq!(tp.bundles[1].to_string(), "L(2,1) e0");
    }

    #[test]
    fn unit_chains() {
        let e = |i| unit_vector(4, i);
        let tp = decompose_component(&[e(0), e(1), e(2), e(3)]).unwrap();
        assert_eq!(tp.vectors, vec![e(3)]);
        assert!(tp.bundles.iter().all(|b| b.base() == ThreeManifold::S3 && b.r.is_zero()));
        let e3 = |i| unit_vector(3, i);
        let tp = decompose_component(&[e3(0), e3(1), e3(2), e3(0)]).unwrap();
        assert_eq!(tp.vectors, vec![e3(0)]);
    }

    #[test]
    fn rods_from_plumbing() {
        let rods = plumbing_to_rods(&[b(2, 3, 5), b(3, 2, 7)], &[int_vec(&[1, 0, 2])], 3).unwrap();
        assert_eq!(rods, vec![int_vec(&[1, 0, 0]), int_vec(&[0, 1, 0]), int_vec(&[2, 3, 5]), int_vec(&[11, 9, 24])]);
        let single = plumbing_to_rods(&[b(1, 4, 0)], &[], 3).unwrap();
        assert_eq!(single[2], int_vec(&[1, 4, 0]));
    }

    #[test]
    fn relation_failures() {
        let bundles = [b(2, 3, 5), b(3, 2, 7)];
        let rep = verify_plumbing_relations(&bundles, &[int_vec(&[2, 0, 4])], 3).unwrap();
        assert!(rep.failures(Relation::VectorPrimitivity) > 0);
        let rep = verify_plumbing_relations(&bundles, &[int_vec(&[0, 0, 1])], 3).unwrap();
        assert!(rep.failures(Relation::Admissibility) > 0);
        assert!(rep.failures(Relation::TriplePrimitivity) > 0);
        let rep = verify_plumbing_relations(&bundles, &[int_vec(&[1, 0, 2])], 3).unwrap();
        assert!(rep.is_valid());
    }

    #[test]
    fn shifted_plumbing_vector_is_still_valid() {
        // w_4 = 3 e_2 + 2 (2,3,5) + 7 (1,0,3) = (11,9,31); minors of (w_3, w_4) are -15, 7, 48.
        let rep = verify_plumbing_relations(&[b(2, 3, 5), b(3, 2, 7)], &[int_vec(&[1, 0, 3])], 3).unwrap();
        assert_eq!(rep.rods[3], int_vec(&[11, 9, 31]));
        assert!(det2(&rep.rods[2], &rep.rods[3]).unwrap().is_one());
        assert!(rep.is_valid());
    }

    #[test]
    fn dependent_first_bundle() {
        // 𝔭_1 = 0, so row 3 is still free for 𝔭_3.
        let s = [
            int_vec(&[0, 0, 1]),
            int_vec(&[-1, 0, 0]),
            int_vec(&[0, 0, 1]),
            int_vec(&[-1, 0, 0]),
            int_vec(&[0, -1, 0]),
        ];
        let tp = decompose_component(&s).unwrap();
        assert_eq!(tp.vectors, vec![int_vec(&[0, 0, 0]), int_vec(&[0, 0, 1])]);
        assert_eq!(plumbing_to_rods(&tp.bundles, &tp.vectors, 3).unwrap(), tp.hermite_rods);
    }
}
