//! Fundamental groups, fill-ins of horizons and ends, and the classification
//! chart for simply connected closed toric manifolds in dimensions 4, 5, 6.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde_json::{json, Value};
use thiserror::Error;

use crate::intlin::{
    det2, format_vector, hermite_normal_form, is_primitive_vector, smith_normal_form, unit_vector, IntLinError,
    IntMatrix, IntVector,
};
use crate::roddiagram::{
    asymptotic_end, int_to_json, superscript, vector_to_json, CrossSection, DiagramError, Rod, RodDiagram, Shape,
    ThreeManifold,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("structure {} is not primitive", format_vector(.0))]
    NotPrimitive(IntVector),
    #[error("vectors of unequal length")]
    Length,
    #[error("compactification is not simply connected after rerouting through the standard basis")]
    AugmentationFailed,
    #[error("manifold is not simply connected (free rank {free_rank}, torsion {torsion:?})")]
    NotSimplyConnected { free_rank: usize, torsion: Vec<BigInt> },
    #[error("classification is available for n = 2, 3, 4, got n = {0}")]
    UnsupportedDimension(usize),
    #[error("a closed diagram may not contain horizon rods")]
    NotClosed,
    #[error("spin four-manifolds have even second Betti number, got {0}")]
    OddSpinBetti(usize),
    #[error(transparent)]
    Diagram(#[from] DiagramError),
    #[error(transparent)]
    IntLin(#[from] IntLinError),
}

/// `Z^free_rank ⊕ Z_{t_1} ⊕ ... ⊕ Z_{t_k}` with `t_i | t_{i+1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbelianGroup {
    pub free_rank: usize,
    pub torsion: Vec<BigInt>,
}

impl AbelianGroup {
    pub fn trivial() -> Self {
        AbelianGroup { free_rank: 0, torsion: Vec::new() }
    }

    pub fn is_trivial(&self) -> bool {
        self.free_rank == 0 && self.torsion.is_empty()
    }

    /// `Z^n / span(columns)`.
    pub fn quotient(n: usize, columns: &[IntVector]) -> Result<Self, TopologyError> {
        if columns.iter().any(|c| c.len() != n) {
            return Err(TopologyError::Length);
        }
        if columns.is_empty() {
            return Ok(AbelianGroup { free_rank: n, torsion: Vec::new() });
        }
        let sf = smith_normal_form(&IntMatrix::from_columns(columns)?);
        let torsion = sf.divisors.iter().filter(|d| *d > &BigInt::one()).cloned().collect();
        Ok(AbelianGroup { free_rank: n - sf.rank(), torsion })
    }

    pub fn to_json(&self) -> Value {
        json!({
            "free_rank": self.free_rank,
            "torsion": self.torsion.iter().map(int_to_json).collect::<Vec<_>>(),
        })
    }
}

impl fmt::Display for AbelianGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self.torsion.iter().map(|t| format!("Z_{t}")).collect();
        match self.free_rank {
            0 => {}
            1 => parts.push("Z".into()),
            k => parts.push(format!("Z{}", superscript(k))),
        }
        if parts.is_empty() {
            f.write_str("1")
        } else {
            f.write_str(&parts.join(" ⊕ "))
        }
    }
}

/// Fundamental group of the manifold given by the diagram: `Z^n` modulo the
/// span of all axis structures.
pub fn fundamental_group(d: &RodDiagram) -> Result<AbelianGroup, TopologyError> {
    AbelianGroup::quotient(d.n(), &d.axis_structures())
}

pub fn is_simply_connected(d: &RodDiagram) -> Result<bool, TopologyError> {
    Ok(fundamental_group(d)?.is_trivial())
}

/// Fundamental group of the cross-section at infinity.
pub fn end_fundamental_group(d: &RodDiagram) -> Result<AbelianGroup, TopologyError> {
    Ok(cross_section_group(&asymptotic_end(d)?))
}

pub fn cross_section_group(cs: &CrossSection) -> AbelianGroup {
    let k = cs.torus_factor;
    match &cs.base {
        ThreeManifold::S3 => AbelianGroup { free_rank: k, torsion: Vec::new() },
        ThreeManifold::Lens { p, .. } => AbelianGroup { free_rank: k, torsion: vec![p.clone()] },
        ThreeManifold::S1xS2 => AbelianGroup { free_rank: k + 1, torsion: Vec::new() },
    }
}

/// Chain of structures from `v` to `w` with consecutive `Det_2 = 1`.
pub fn fillin_path(v: &[BigInt], w: &[BigInt]) -> Result<Vec<IntVector>, TopologyError> {
    let n = v.len();
    if w.len() != n || n < 2 {
        return Err(TopologyError::Length);
    }
    for x in [v, w] {
        if !is_primitive_vector(x)? {
            return Err(TopologyError::NotPrimitive(x.to_vec()));
        }
    }
    let hf = hermite_normal_form(&IntMatrix::from_columns(&[v.to_vec(), w.to_vec()])?);
    let back = hf.q.inverse_unimodular()?;
    let lift = |x: BigInt, y: BigInt| -> Result<IntVector, TopologyError> {
        let mut e = vec![BigInt::zero(); n];
        e[0] = x;
        e[1] = y;
        Ok(back.mul_vec(&e)?)
    };
    let p = hf.h.get(1, 1).clone();
    if p.is_zero() {
        return Ok(vec![v.to_vec(), lift(BigInt::zero(), BigInt::one())?, w.to_vec()]);
    }
    if p.is_one() {
        return Ok(vec![v.to_vec(), w.to_vec()]);
    }
    let q = hf.h.get(0, 1).clone();
    let mut path = vec![v.to_vec(), lift(BigInt::zero(), BigInt::one())?];
    // Convergents h_j / k_j of p / q, appended as (k_j, h_j).
    let (mut h_prev, mut h_cur) = (BigInt::zero(), BigInt::one());
    let (mut k_prev, mut k_cur) = (BigInt::one(), BigInt::zero());
    let (mut a, mut b) = (p, q);
    while !b.is_zero() {
        let digit = &a / &b;
        let rem = &a % &b;
        let h_next = &digit * &h_cur + &h_prev;
        let k_next = &digit * &k_cur + &k_prev;
        h_prev = std::mem::replace(&mut h_cur, h_next);
        k_prev = std::mem::replace(&mut k_cur, k_next);
        path.push(lift(k_cur.clone(), h_cur.clone())?);
        a = std::mem::replace(&mut b, rem);
    }
    debug_assert_eq!(path.last().map(Vec::as_slice), Some(w));
    Ok(path)
}

/// Where a fill-in happens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FillSite {
    /// Horizon rod index in the input diagram.
    Horizon(usize),
    End,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FillAction {
    /// The flanking rods meet at a new corner.
    Corner,
    /// The flanking rods carry the same structure and become one rod.
    Merge,
    /// Structures inserted between the flanking rods.
    Chain(Vec<IntVector>),
}

impl FillAction {
    pub fn kind(&self) -> &'static str {
        match self {
            FillAction::Corner => "corner",
            FillAction::Merge => "merge",
            FillAction::Chain(_) => "chain",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fill {
    pub site: FillSite,
    pub from: IntVector,
    pub to: IntVector,
    pub det2: BigInt,
    pub action: FillAction,
    /// Standard basis indices the chain was rerouted through.
    pub waypoints: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FillinPlan {
    pub fills: Vec<Fill>,
    pub diagram: RodDiagram,
    /// Input axis rods behind each output rod; empty for inserted rods.
    pub sources: Vec<Vec<usize>>,
}

impl FillinPlan {
    pub fn augmented(&self) -> bool {
        self.fills.iter().any(|f| !f.waypoints.is_empty())
    }

    pub fn to_json(&self) -> Value {
        let fills: Vec<Value> = self
            .fills
            .iter()
            .map(|f| {
                let site = match f.site {
                    FillSite::Horizon(i) => json!({ "horizon": i }),
                    FillSite::End => json!("end"),
                };
                let inserted = match &f.action {
                    FillAction::Chain(c) => c.iter().map(|v| vector_to_json(v)).collect(),
                    _ => Vec::new(),
                };
                json!({
                    "site": site,
                    "from": vector_to_json(&f.from),
                    "to": vector_to_json(&f.to),
                    "det2": int_to_json(&f.det2),
                    "action": f.action.kind(),
                    "inserted": inserted,
                    "waypoints": f.waypoints,
                })
            })
            .collect();
        json!({
            "fills": fills,
            "augmented": self.augmented(),
            "sources": self.sources,
            "diagram": self.diagram.to_json(),
        })
    }
}

impl fmt::Display for FillinPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for fill in &self.fills {
            let site = match fill.site {
                FillSite::Horizon(i) => format!("horizon {i}"),
                FillSite::End => "end".into(),
            };
            let action = match &fill.action {
                FillAction::Chain(c) => {
                    let chain: Vec<String> = c.iter().map(|v| format_vector(v)).collect();
                    format!("insert {}", chain.join(" "))
                }
                a => a.kind().to_string(),
            };
            write!(
                f,
                "{site}: {} -> {} (Det_2 = {}) {action}",
                format_vector(&fill.from),
                format_vector(&fill.to),
                fill.det2
            )?;
            if !fill.waypoints.is_empty() {
                write!(f, " via e{:?}", fill.waypoints.iter().map(|k| k + 1).collect::<Vec<_>>())?;
            }
            writeln!(f)?;
        }
        write!(f, "{}", self.diagram)
    }
}

struct Entry {
    v: IntVector,
    sources: Vec<usize>,
}

fn chain_between(from: &[BigInt], to: &[BigInt], waypoints: &[usize]) -> Result<Vec<IntVector>, TopologyError> {
    let n = from.len();
    let mut stops: Vec<IntVector> = vec![from.to_vec()];
    stops.extend(waypoints.iter().map(|&k| unit_vector(n, k)));
    stops.push(to.to_vec());
    let mut out: Vec<IntVector> = Vec::new();
    for pair in stops.windows(2) {
        let path = fillin_path(&pair[0], &pair[1])?;
        out.extend(path.into_iter().skip(1));
    }
    out.pop();
    Ok(out)
}

fn assemble(d: &RodDiagram, reroute: Option<(FillSite, &[usize])>) -> Result<FillinPlan, TopologyError> {
    let waypoints_for = |site: FillSite| match reroute {
        Some((s, w)) if s == site => w.to_vec(),
        _ => Vec::new(),
    };
    let mut entries: Vec<Entry> = Vec::new();
    let mut fills = Vec::new();
    let mut merge_next = false;
    let rods = d.rods();
    for (i, rod) in rods.iter().enumerate() {
        match rod.structure() {
            Some(v) => {
                if merge_next {
                    entries.last_mut().expect("horizon follows an axis rod").sources.push(i);
                    merge_next = false;
                } else {
                    entries.push(Entry { v: v.clone(), sources: vec![i] });
                }
            }
            None => {
                let from = entries.last().expect("horizon follows an axis rod").v.clone();
                let to = rods[i + 1].structure().expect("horizon precedes an axis rod").clone();
                let site = FillSite::Horizon(i);
                let fill = plan_fill(site, from, to, waypoints_for(site))?;
                match &fill.action {
                    FillAction::Merge => merge_next = true,
                    FillAction::Chain(c) => {
                        entries.extend(c.iter().map(|v| Entry { v: v.clone(), sources: Vec::new() }))
                    }
                    FillAction::Corner => {}
                }
                fills.push(fill);
            }
        }
    }
    let from = entries.last().expect("nonempty").v.clone();
    let to = entries[0].v.clone();
    let end = plan_fill(FillSite::End, from, to, waypoints_for(FillSite::End))?;
    match &end.action {
        FillAction::Merge if entries.len() > 1 => {
            let last = entries.pop().expect("len > 1");
            entries[0].sources.extend(last.sources);
            entries[0].sources.sort_unstable();
        }
        FillAction::Chain(c) => entries.extend(c.iter().map(|v| Entry { v: v.clone(), sources: Vec::new() })),
        _ => {}
    }
    fills.push(end);
    let out_rods = entries.iter().map(|e| Rod::axis(e.v.clone())).collect();
    let diagram = RodDiagram::new(d.n(), Shape::Disk, out_rods)?;
    Ok(FillinPlan { fills, diagram, sources: entries.into_iter().map(|e| e.sources).collect() })
}

fn plan_fill(site: FillSite, from: IntVector, to: IntVector, waypoints: Vec<usize>) -> Result<Fill, TopologyError> {
    let det = det2(&from, &to)?;
    let action = if !waypoints.is_empty() {
        FillAction::Chain(chain_between(&from, &to, &waypoints)?)
    } else if det.is_one() {
        FillAction::Corner
    } else if det.is_zero() {
        FillAction::Merge
    } else {
        FillAction::Chain(chain_between(&from, &to, &[])?)
    };
    Ok(Fill { site, from, to, det2: det, action, waypoints })
}

fn in_span(span: &[IntVector], v: &IntVector) -> Result<bool, TopologyError> {
    let n = v.len();
    let before = AbelianGroup::quotient(n, span)?;
    let mut with = span.to_vec();
    with.push(v.clone());
    Ok(AbelianGroup::quotient(n, &with)? == before)
}

/// Close a half-plane diagram into a disk diagram by filling every horizon
/// and the end. If the result is not simply connected, the first fill-in is
/// rerouted through the missing standard basis vectors.
pub fn compactify(d: &RodDiagram) -> Result<FillinPlan, TopologyError> {
    if d.shape() != Shape::HalfPlane {
        return Err(DiagramError::WrongShape { expected: "half-plane" }.into());
    }
    let plan = assemble(d, None)?;
    if is_simply_connected(&plan.diagram)? {
        return Ok(plan);
    }
    let site = d.horizons().first().map_or(FillSite::End, |h| FillSite::Horizon(h.index));
    let mut waypoints = Vec::new();
    let mut current = plan;
    for k in 0..d.n() {
        let span = current.diagram.axis_structures();
        if in_span(&span, &unit_vector(d.n(), k))? {
            continue;
        }
        waypoints.push(k);
        current = assemble(d, Some((site, &waypoints)))?;
        if is_simply_connected(&current.diagram)? {
            return Ok(current);
        }
    }
    Err(TopologyError::AugmentationFailed)
}

fn closed_corner_count(d: &RodDiagram) -> Result<usize, TopologyError> {
    if d.shape() != Shape::Disk {
        return Err(DiagramError::WrongShape { expected: "disk" }.into());
    }
    if d.rods().iter().any(Rod::is_horizon) {
        return Err(TopologyError::NotClosed);
    }
    let g = fundamental_group(d)?;
    if !g.is_trivial() {
        return Err(TopologyError::NotSimplyConnected { free_rank: g.free_rank, torsion: g.torsion });
    }
    Ok(d.corners().len())
}

/// Second Betti number of the closed manifold: number of fixed points
/// (corners) minus `n`.
pub fn betti2(d: &RodDiagram) -> Result<usize, TopologyError> {
    let corners = closed_corner_count(d)?;
    Ok(corners.saturating_sub(d.n()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyRow {
    /// `k = 0`
    Minimal,
    Spin,
    NonSpin,
}

impl FamilyRow {
    pub fn number(self) -> u8 {
        match self {
            FamilyRow::Minimal => 1,
            FamilyRow::Spin => 2,
            FamilyRow::NonSpin => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Count {
    Fixed(usize),
    /// A multiplicity the chart leaves open, e.g. `ℓ`.
    Free(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Summand {
    pub count: Count,
    pub manifold: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    pub n: usize,
    pub row: FamilyRow,
    pub k: usize,
    pub summands: Vec<Summand>,
    pub note: Option<String>,
}

impl Classification {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut first = true;
        for s in &self.summands {
            let piece = match &s.count {
                Count::Fixed(1) => s.manifold.clone(),
                Count::Fixed(c) if first => format!("#{c}{}", paren(&s.manifold)),
                Count::Fixed(c) => format!("{c}{}", paren(&s.manifold)),
                Count::Free(c) => format!("{c}{}", s.manifold),
            };
            if !first {
                out.push_str(" # ");
            }
            out.push_str(&piece);
            first = false;
        }
        out
    }

    pub fn to_json(&self) -> Value {
        json!({
            "n": self.n,
            "family_row": self.row.number(),
            "k": self.k,
            "summands": self.summands.iter().map(|s| json!({
                "count": match &s.count { Count::Fixed(c) => json!(c), Count::Free(c) => json!(c) },
                "manifold": s.manifold,
            })).collect::<Vec<_>>(),
            "rendered": self.render(),
            "note": self.note,
        })
    }
}

fn paren(m: &str) -> String {
    if m.starts_with('(') {
        m.to_string()
    } else {
        format!("({m})")
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render())?;
        if let Some(n) = &self.note {
            write!(f, "  [{n}]")?;
        }
        Ok(())
    }
}

fn fixed(count: usize, manifold: &str) -> Option<Summand> {
    (count > 0).then(|| Summand { count: Count::Fixed(count), manifold: manifold.to_string() })
}

/// Identify a simply connected closed diagram with an entry of the chart.
/// `k` is the second Betti number; `spin` selects between rows two and three.
pub fn classify(d: &RodDiagram, spin: bool) -> Result<Classification, TopologyError> {
    let n = d.n();
    if !(2..=4).contains(&n) {
        return Err(TopologyError::UnsupportedDimension(n));
    }
    let k = betti2(d)?;
    let mut note = None;
    let (row, summands): (FamilyRow, Vec<Summand>) = if k == 0 {
        if !spin {
            note = Some("k = 0 forces the first row".into());
        }
        let m = match n {
            2 => "S⁴",
            3 => "S⁵",
            _ => "S³×S³",
        };
        (FamilyRow::Minimal, fixed(1, m).into_iter().collect())
    } else if spin {
        let list = match n {
            2 => {
                if k % 2 == 1 {
                    return Err(TopologyError::OddSpinBetti(k));
                }
                vec![fixed(k / 2, "S²×S²")]
            }
            3 => vec![fixed(k, "S²×S³")],
            _ => vec![fixed(k, "S²×S⁴"), fixed(k + 1, "S³×S³")],
        };
        (FamilyRow::Spin, list.into_iter().flatten().collect())
    } else {
        let list = match n {
            2 => {
                note = Some(format!("0 ≤ ℓ ≤ {k} is not determined by k"));
                vec![
                    Some(Summand { count: Count::Free("ℓ".into()), manifold: "CP²".into() }),
                    Some(Summand { count: Count::Free(format!("({k}−ℓ)")), manifold: "C̄P²".into() }),
                ]
            }
            3 => vec![fixed(1, "(S²×̃S³)"), fixed(k - 1, "S²×S³")],
            _ => vec![fixed(1, "(S²×̃S⁴)"), fixed(k - 1, "S²×S⁴"), fixed(k + 1, "S³×S³")],
        };
        (FamilyRow::NonSpin, list.into_iter().flatten().collect())
    };
    Ok(Classification { n, row, k, summands, note })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intlin::int_vec;

    fn hp(n: usize, spec: &[Option<Vec<i64>>]) -> RodDiagram {
        let rods = spec.iter().map(|s| s.as_ref().map_or_else(Rod::horizon, |v| Rod::axis(int_vec(v)))).collect();
        RodDiagram::new(n, Shape::HalfPlane, rods).unwrap()
    }

    fn disk(n: usize, vs: &[Vec<i64>]) -> RodDiagram {
        RodDiagram::new(n, Shape::Disk, vs.iter().map(|v| Rod::axis(int_vec(v))).collect()).unwrap()
    }

    #[test]
    fn fillin_example() {
        let path = fillin_path(&int_vec(&[1, 0]), &int_vec(&[2, 5])).unwrap();
        assert_eq!(path, vec![int_vec(&[1, 0]), int_vec(&[0, 1]), int_vec(&[1, 2]), int_vec(&[2, 5])]);
        let direct = fillin_path(&int_vec(&[1, 0, 0]), &int_vec(&[0, 1, 0])).unwrap();
        assert_eq!(direct.len(), 2);
        let par = fillin_path(&int_vec(&[1, 1, 0]), &int_vec(&[1, 1, 0])).unwrap();
        assert_eq!(par.len(), 3);
        assert!(det2(&par[0], &par[1]).unwrap().is_one());
    }

    #[test]
    fn counterexample_compactifies_to_sphere() {
        let d = hp(2, &[Some(vec![1, 0]), None, Some(vec![0, 1]), None, Some(vec![1, 0])]);
        assert!(fundamental_group(&d).unwrap().is_trivial());
        assert_eq!(end_fundamental_group(&d).unwrap(), AbelianGroup { free_rank: 1, torsion: vec![] });
        let plan = compactify(&d).unwrap();
        assert_eq!(plan.diagram.axis_structures(), vec![int_vec(&[1, 0]), int_vec(&[0, 1])]);
        assert_eq!(plan.diagram.corners().len(), 2);
        assert_eq!(plan.sources, vec![vec![0, 4], vec![2]]);
        let c = classify(&plan.diagram, true).unwrap();
        assert_eq!((c.k, c.render().as_str()), (0, "S⁴"));
    }

    #[test]
    fn augmentation_reaches_simple_connectivity() {
        let d = hp(2, &[Some(vec![1, 0]), None, Some(vec![1, 0])]);
        let plan = compactify(&d).unwrap();
        assert!(plan.augmented());
        assert!(is_simply_connected(&plan.diagram).unwrap());
    }

    #[test]
    fn lens_end_group() {
        let d = hp(3, &[Some(vec![1, 0, 0]), None, Some(vec![11, 9, 24])]);
        let g = end_fundamental_group(&d).unwrap();
        assert_eq!(g, AbelianGroup { free_rank: 1, torsion: vec![3.into()] });
        assert_eq!(g.to_string(), "Z_3 ⊕ Z");
    }

    #[test]
    fn chart_entries() {
        let d = disk(3, &[vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1], vec![1, 1, 0], vec![1, 1, 1]]);
        assert_eq!(betti2(&d).unwrap(), 2);
        assert_eq!(classify(&d, true).unwrap().render(), "#2(S²×S³)");
        let d4 = disk(4, &[vec![1, 0, 0, 0], vec![0, 1, 0, 0], vec![0, 0, 1, 0], vec![0, 0, 0, 1], vec![1, 1, 1, 0]]);
        let c = classify(&d4, false).unwrap();
        assert_eq!(c.k, 1);
        assert_eq!(c.render(), "(S²×̃S⁴) # 2(S³×S³)");
        let bad = disk(2, &[vec![1, 0], vec![1, 2]]);
        assert!(matches!(classify(&bad, true), Err(TopologyError::NotSimplyConnected { .. })));
    }
}
