//! Sparse embeddings: column structure, and the subspace-embedding distortion of an
//! oblivious sketch on a random orthonormal basis.

use msp::harness::instances::random_orthogonal;
use msp::linalg::eig::singular_values;
use msp::linalg::DenseMatrix;
use msp::sketch::{make_ose, make_sparse_embedding};

fn main() -> msp::Result<()> {
    let s = make_sparse_embedding(8, 20, 3, 42)?;
    println!("column 0 of S: {:?}", s.column(0).collect::<Vec<_>>());

    let (n, d) = (2000, 50);
    let q = random_orthogonal(n, 7);
    let u = DenseMatrix::from_fn(n, d, |i, j| q.get(i, j));
    let mut inside = 0;
    for seed in 0..10 {
        let ose = make_ose(n, d, 0.1, 0.5, seed)?;
        let sv = singular_values(&ose.apply_dense(&u)?);
        let (hi, lo) = (sv[0], sv[d - 1]);
        let ok = lo >= 1.0 / 1.5 && hi <= 1.5;
        inside += ok as usize;
        println!("seed {seed}: phi = {}  sigma in [{lo:.3}, {hi:.3}]", ose.rows());
    }
    println!("{inside}/10 trials within [1/(1+eps), 1+eps]");
    Ok(())
}
