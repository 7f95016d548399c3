//! Homogeneous multilinear polynomials stored as sparse tensors, together with
//! decoupling and recoupling utilities.

mod abs_round;
mod assignment;
mod format;
mod recouple;
mod symtensor;
mod tensor;

pub use abs_round::{decouple_abs_round, round_to_cube, AbsRounding};
pub use assignment::{Assignment, Domain};
pub use format::{parse_tensor_file, write_sym_tensor, write_tensor, TensorFile};
pub use recouple::{recouple_cubic, recouple_odd_d, Recoupling};
pub use symtensor::{eval_coupled, eval_decoupled, slice_matrix, symmetrize, SymTensor};
pub use tensor::Tensor;

pub(crate) fn factorial(d: usize) -> f64 {
    (1..=d).map(|v| v as f64).product()
}

/// All permutations of `0..d` in lexicographic order.
pub(crate) fn permutations(d: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..d).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (0..d.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
            break;
        };
        let j = (i + 1..d).rev().find(|&j| cur[j] > cur[i]).unwrap();
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
    out
}
