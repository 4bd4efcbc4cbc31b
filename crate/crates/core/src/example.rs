//! The bundled N=4, K=2 reference configuration.
//!
//! Two factor matrices ship: the printed one, whose corner sums at
//! `(r,t) = (1,2)` disagree (2.0 against 1.8), and a corrected one with
//! `s_10 = 0.1`, which has uniform sums.

use crate::grid::Cell;

pub const N: usize = 4;
pub const K: usize = 2;

pub const XPRIME_IDX: [usize; 5] = [0, 2, 0, 2, 0];
pub const YPRIME_IDX: [usize; 5] = [2, 4, 2, 0, 2];

const HEIGHTS: [[f64; 5]; 5] = [
    [2.0, 3.0, 2.0, 1.0, 2.0],
    [2.0, 2.0, 3.0, 1.0, 3.0],
    [1.0, 3.0, 2.0, 3.0, 1.0],
    [3.0, 2.0, 4.0, 2.0, 0.0],
    [2.0, 3.0, 2.0, 4.0, 4.0],
];

const FACTORS_ORIGINAL: [[f64; 5]; 5] = [
    [0.85, 0.9, 0.95, 0.9, 0.9],
    [0.2, 0.45, 0.8, 0.7, 0.6],
    [0.0, 0.0, 0.0, 0.5, 0.95],
    [-0.4, -0.2, 0.0, 0.3, 0.6],
    [-0.8, -0.4, 0.0, 0.1, 0.25],
];

/// JSON config with the corrected factor matrix.
pub const CORRECTED_JSON: &str = include_str!("../fixtures/paper-example.json");
/// JSON config with the factor matrix exactly as printed.
pub const ORIGINAL_JSON: &str = include_str!("../fixtures/paper-example-original.json");

fn rows(table: &[[f64; 5]; 5]) -> Vec<Vec<f64>> {
    table.iter().map(|r| r.to_vec()).collect()
}

pub fn heights() -> Vec<Vec<f64>> {
    rows(&HEIGHTS)
}

pub fn factors_original() -> Vec<Vec<f64>> {
    rows(&FACTORS_ORIGINAL)
}

pub fn factors_corrected() -> Vec<Vec<f64>> {
    let mut s = factors_original();
    s[1][0] = 0.1;
    s
}

/// `B_1 = [0,½]²`, `B_2 = [0,½]×[½,1]`, `B_3 = [½,1]×[0,1]` as cell sets.
pub fn partition_cells() -> Vec<Vec<Cell>> {
    let block = |is: [usize; 2], js: &[usize]| -> Vec<Cell> {
        is.iter().flat_map(|&i| js.iter().map(move |&j| Cell::new(i, j))).collect()
    };
    vec![block([1, 2], &[1, 2]), block([1, 2], &[3, 4]), block([3, 4], &[1, 2, 3, 4])]
}
