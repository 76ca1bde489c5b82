//! Fixtures for the benchmarks.

use rodtopo::intlin::{int_vec, IntMatrix, IntVector};
use rodtopo::roddiagram::RodDiagram;

pub fn hermite_columns() -> IntMatrix {
    IntMatrix::from_columns(&[int_vec(&[1, 0, 0]), int_vec(&[1, -1, 1]), int_vec(&[2, 0, 3]), int_vec(&[1, 1, 0])])
        .expect("rectangular")
}

/// Dense `rows x cols` matrix with entries in `[-9, 9]` from a fixed LCG.
pub fn dense(rows: usize, cols: usize) -> IntMatrix {
    let mut state = 0x2545_f491_4f6c_dd1du64;
    let data: Vec<Vec<i64>> = (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| {
                    state = state.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407);
                    ((state >> 33) % 19) as i64 - 9
                })
                .collect()
        })
        .collect();
    IntMatrix::from_i64_rows(&data).expect("rectangular")
}

/// Consecutive Fibonacci numbers; the fill-in chain between them is long.
pub fn far_pair() -> (IntVector, IntVector) {
    (int_vec(&[1, 0]), int_vec(&[89, 144]))
}

pub fn diagram(name: &str) -> RodDiagram {
    let path = format!("{}/../../data/{name}", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    RodDiagram::parse(&text).unwrap_or_else(|e| panic!("{path}: {e}"))
}
