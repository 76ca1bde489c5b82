//! Generators and property checks shared by the property suites and the
//! acceptance harness.
#![allow(dead_code)]

use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, RngSeed, TestCaseError};
use rodtopo::intlin::{
    det2, det_k, determinant_divisor, hermite_normal_form, is_primitive_set, is_primitive_vector, sign_normalize,
    smith_normal_form, vector_gcd, IntMatrix, IntVector,
};
use rodtopo::plumbing::{decompose_component, plumbing_to_rods, triple_to_bundle};
use rodtopo::roddiagram::{Rod, RodDiagram, Shape};
use rodtopo::topology::{compactify, fillin_path, is_simply_connected, TopologyError};
use rodtopo::BigInt;

pub const CASES: u32 = 1000;

pub fn config(seed: u64) -> Config {
    Config {
        cases: CASES,
        rng_algorithm: RngAlgorithm::ChaCha,
        rng_seed: RngSeed::Fixed(seed),
        failure_persistence: None,
        ..Config::default()
    }
}

pub fn big(v: &[i64]) -> IntVector {
    v.iter().map(|&x| BigInt::from(x)).collect()
}

fn make_primitive(mut v: Vec<i64>) -> Vec<i64> {
    let g = v.iter().fold(0i64, |g, &x| g.gcd(&x));
    if g != 1 {
        let last = v.len() - 1;
        v[last] = 1;
    }
    v
}

pub fn primitive(n: usize, bound: i64) -> impl Strategy<Value = IntVector> {
    prop::collection::vec(-bound..=bound, n).prop_map(|v| big(&make_primitive(v)))
}

pub fn small_matrix() -> impl Strategy<Value = IntMatrix> {
    (1usize..=4, 1usize..=5)
        .prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(-6i64..=6, c), r))
        .prop_map(|rows| IntMatrix::from_i64_rows(&rows).unwrap())
}

/// Product of random elementary row operations.
pub fn unimodular(n: usize) -> impl Strategy<Value = IntMatrix> {
    prop::collection::vec((0..n, 0..n, -3i64..=3, any::<bool>()), 0..16).prop_map(move |ops| {
        let mut m: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect()).collect();
        for (i, j, c, flag) in ops {
            if i != j {
                let src = m[j].clone();
                m[i].iter_mut().zip(&src).for_each(|(x, y)| *x += c * y);
            } else if flag {
                m[i].iter_mut().for_each(|x| *x = -*x);
            } else {
                m.swap(i, (i + 1) % n);
            }
        }
        IntMatrix::from_i64_rows(&m).unwrap()
    })
}

pub fn matrix_with_unimodular() -> impl Strategy<Value = (IntMatrix, IntMatrix, IntMatrix)> {
    small_matrix().prop_flat_map(|a| {
        let (r, c) = (a.rows(), a.cols());
        (Just(a), unimodular(r), unimodular(c))
    })
}

/// `k <= n` vectors in `Z^n`, half of them drawn as columns of a unimodular matrix.
pub fn vector_set() -> impl Strategy<Value = Vec<IntVector>> {
    (2usize..=5).prop_flat_map(|n| (Just(n), 1..=n)).prop_flat_map(|(n, k)| {
        let random = prop::collection::vec(prop::collection::vec(-3i64..=3, n), k)
            .prop_map(|vs| vs.iter().map(|v| big(v)).collect::<Vec<_>>());
        let basis = unimodular(n).prop_map(move |m| m.columns().into_iter().take(k).collect::<Vec<_>>());
        prop_oneof![random, basis]
    })
}

/// Unimodular matrix whose first column is the primitive vector `w`.
pub fn completion(w: &[BigInt]) -> IntMatrix {
    let hf = hermite_normal_form(&IntMatrix::from_columns(&[w.to_vec()]).unwrap());
    hf.q.inverse_unimodular().unwrap()
}

/// Chain of structures with every consecutive pair admissible.
pub fn chain(n: usize, len: usize) -> impl Strategy<Value = Vec<IntVector>> {
    let steps = prop::collection::vec((-2i64..=2, prop::collection::vec(-2i64..=2, n - 1)), len - 1);
    (primitive(n, 2), steps).prop_map(move |(first, steps)| {
        let mut out = vec![first];
        for (c, tail) in steps {
            let tail = make_primitive(tail);
            let y: IntVector = std::iter::once(c).chain(tail).map(BigInt::from).collect();
            let m = completion(out.last().unwrap());
            out.push(m.mul_vec(&y).unwrap());
        }
        out
    })
}

pub fn component() -> impl Strategy<Value = Vec<IntVector>> {
    (3usize..=5, 3usize..=6).prop_flat_map(|(n, len)| chain(n, len))
}

pub fn component_with_unimodular() -> impl Strategy<Value = (Vec<IntVector>, IntMatrix)> {
    component().prop_flat_map(|s| {
        let n = s[0].len();
        (Just(s), unimodular(n))
    })
}

pub fn primitive_pair() -> impl Strategy<Value = (IntVector, IntVector)> {
    (2usize..=6).prop_flat_map(|n| (primitive(n, 6), primitive(n, 6)))
}

/// Half-plane diagram: admissible chains separated by horizons.
pub fn half_plane_diagram() -> impl Strategy<Value = RodDiagram> {
    // A lone component needs two rods to reach both ends.
    (2usize..=4, 1usize..=4)
        .prop_flat_map(|(n, comps)| {
            let first = (if comps == 1 { 2usize } else { 1 }..=3).prop_flat_map(move |len| chain(n, len));
            let rest = prop::collection::vec((1usize..=3).prop_flat_map(move |len| chain(n, len)), comps - 1);
            (first, rest)
        })
        .prop_map(|(first, rest)| std::iter::once(first).chain(rest).collect::<Vec<_>>())
        .prop_map(|components| {
            let n = components[0][0].len();
            let mut rods = Vec::new();
            for (i, comp) in components.iter().enumerate() {
                if i > 0 {
                    rods.push(Rod::horizon());
                }
                rods.extend(comp.iter().map(|v| Rod::axis(v.clone())));
            }
            RodDiagram::new(n, Shape::HalfPlane, rods).expect("chains are admissible and horizons isolated")
        })
}

/// `Q` applied to every axis structure.
pub fn transform(d: &RodDiagram, q: &IntMatrix) -> RodDiagram {
    let rods = d
        .rods()
        .iter()
        .map(|r| match r.structure() {
            Some(v) => Rod::axis(q.mul_vec(v).unwrap()),
            None => Rod::horizon(),
        })
        .collect();
    RodDiagram::new(d.n(), d.shape(), rods).unwrap()
}

pub fn check_hnf_invariance((a, b, _): (IntMatrix, IntMatrix, IntMatrix)) -> Result<(), TestCaseError> {
    let ha = hermite_normal_form(&a);
    let ba = b.checked_mul(&a).unwrap();
    let hb = hermite_normal_form(&ba);
    prop_assert_eq!(&ha.h, &hb.h);
    prop_assert_eq!(ha.q.checked_mul(&a).unwrap(), ha.h.clone());
    prop_assert!(ha.q.determinant().unwrap().abs().is_one());
    Ok(())
}

pub fn check_detk_invariance((a, b, c): (IntMatrix, IntMatrix, IntMatrix)) -> Result<(), TestCaseError> {
    let bac = b.checked_mul(&a).unwrap().checked_mul(&c).unwrap();
    for k in 0..=a.rows().min(a.cols()) {
        prop_assert_eq!(determinant_divisor(&a, k).unwrap(), determinant_divisor(&bac, k).unwrap(), "k = {}", k);
    }
    Ok(())
}

pub fn check_smith((a, _, _): (IntMatrix, IntMatrix, IntMatrix)) -> Result<(), TestCaseError> {
    let f = smith_normal_form(&a);
    prop_assert_eq!(f.u.checked_mul(&a).unwrap().checked_mul(&f.v).unwrap(), f.s.clone());
    prop_assert!(f.u.determinant().unwrap().abs().is_one());
    prop_assert!(f.v.determinant().unwrap().abs().is_one());
    for i in 0..f.s.rows() {
        for j in 0..f.s.cols() {
            if i != j {
                prop_assert!(f.s.get(i, j).is_zero());
            }
        }
    }
    let d = &f.divisors;
    for i in 0..d.len() {
        prop_assert!(!d[i].is_negative());
        if i + 1 < d.len() {
            let divides = if d[i].is_zero() { d[i + 1].is_zero() } else { (&d[i + 1] % &d[i]).is_zero() };
            prop_assert!(divides, "s_{} does not divide s_{}", i + 1, i + 2);
        }
        // s_i = Det_i / Det_{i-1}, with Det_i computed from minors.
        let prev = determinant_divisor(&a, i).unwrap();
        let cur = determinant_divisor(&a, i + 1).unwrap();
        let expected = if prev.is_zero() { BigInt::zero() } else { &cur / &prev };
        prop_assert_eq!(&d[i], &expected, "i = {}", i + 1);
    }
    Ok(())
}

pub fn check_primitive_routes(vs: Vec<IntVector>) -> Result<(), TestCaseError> {
    let (n, k) = (vs[0].len(), vs.len());
    let a = IntMatrix::from_columns(&vs).unwrap();
    let by_function = is_primitive_set(&vs).unwrap();
    let by_divisor = det_k(&vs).unwrap().is_one();
    let hf = hermite_normal_form(&a);
    let by_block = (0..n).all(|i| (0..k).all(|j| *hf.h.get(i, j) == BigInt::from(i64::from(i == j))));
    prop_assert_eq!(by_function, by_divisor);
    prop_assert_eq!(by_divisor, by_block);
    if by_block {
        // The vectors are the first columns of the unimodular Q⁻¹.
        let qi = hf.q.inverse_unimodular().unwrap();
        for (j, v) in vs.iter().enumerate() {
            prop_assert_eq!(&qi.column(j), v);
        }
    }
    Ok(())
}

pub fn check_plumbing_roundtrip((s, q): (Vec<IntVector>, IntMatrix)) -> Result<(), TestCaseError> {
    let n = s[0].len();
    let tp = decompose_component(&s).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let signed: Vec<IntVector> =
        s.iter().zip(&tp.flipped).map(|(v, &f)| if f { v.iter().map(|x| -x).collect() } else { v.clone() }).collect();
    let hermite = hermite_normal_form(&IntMatrix::from_columns(&signed).unwrap()).h.columns();
    prop_assert_eq!(&tp.hermite_rods, &hermite);
    let rods = plumbing_to_rods(&tp.bundles, &tp.vectors, n).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(&rods, &hermite);
    let again = decompose_component(&rods).unwrap();
    prop_assert_eq!(&again.bundles, &tp.bundles);
    prop_assert_eq!(&again.vectors, &tp.vectors);
    for b in &tp.bundles {
        if b.p >= BigInt::one() {
            prop_assert!(!b.q.is_negative() && b.q < b.p && !b.r.is_negative() && b.r < b.p);
            prop_assert!(b.q.gcd(&b.p).is_one());
        }
    }
    // Coordinates do not matter.
    let moved: Vec<IntVector> = s.iter().map(|v| q.mul_vec(v).unwrap()).collect();
    let tq = decompose_component(&moved).unwrap();
    prop_assert_eq!(&tq.bundles, &tp.bundles);
    prop_assert_eq!(&tq.vectors, &tp.vectors);
    Ok(())
}

pub fn check_plumbing_det3(s: Vec<IntVector>) -> Result<(), TestCaseError> {
    let tp = decompose_component(&s).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let w = &tp.hermite_rods;
    for (i, p) in tp.vectors.iter().enumerate() {
        // 𝔭_{i+2} sits with w_{i+2}, w_{i+3} (1-based).
        let (a, b) = (&w[i + 1], &w[i + 2]);
        if p.iter().all(Zero::is_zero) {
            continue;
        }
        let d = det_k(&[a.clone(), b.clone(), p.clone()]).unwrap();
        prop_assert!(d.is_one(), "Det_3 = {} for vector {}", d, i + 2);
        let bundle = triple_to_bundle(&w[i + 1], &w[i + 2], &w[i + 3]).unwrap();
        prop_assert_eq!(&bundle, &tp.bundles[i + 1]);
    }
    Ok(())
}

pub fn check_fillin((v, w): (IntVector, IntVector)) -> Result<(), TestCaseError> {
    let path = fillin_path(&v, &w).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(path.first().unwrap(), &v);
    prop_assert_eq!(path.last().unwrap(), &w);
    for u in &path {
        prop_assert!(is_primitive_vector(u).unwrap());
    }
    for pair in path.windows(2) {
        prop_assert!(det2(&pair[0], &pair[1]).unwrap().is_one());
    }
    Ok(())
}

pub fn check_compactify(d: RodDiagram) -> Result<(), TestCaseError> {
    match compactify(&d) {
        Ok(plan) => {
            prop_assert!(is_simply_connected(&plan.diagram).unwrap());
            // Every input axis rod survives; equal end rods may merge.
            let mut seen: Vec<usize> = plan.sources.iter().flatten().copied().collect();
            seen.sort_unstable();
            seen.dedup();
            prop_assert_eq!(seen, d.axis_indices());
            for (out, src) in plan.sources.iter().enumerate() {
                for &i in src {
                    prop_assert_eq!(
                        sign_normalize(plan.diagram.structure(out).unwrap()),
                        sign_normalize(d.structure(i).unwrap())
                    );
                }
            }
            Ok(())
        }
        Err(TopologyError::AugmentationFailed) => Ok(()),
        Err(e) => Err(TestCaseError::fail(format!("unexpected error {e}"))),
    }
}

pub fn gcd_of(v: &[BigInt]) -> BigInt {
    vector_gcd(v)
}
