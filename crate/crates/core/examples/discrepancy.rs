//! Covariance discrepancies, plain and symmetrized.

use cellwise::evalkit::{discrepancy_symmetric, gen_a09, gen_randcorr, SymmetricKind};
use cellwise::{discrepancy, SymMatrix};

fn main() -> cellwise::Result<()> {
    let a = gen_a09(5);
    let b = gen_randcorr(5, 3)?;
    println!("D(A09, R)     = {:.4}", discrepancy(&a, &b)?);
    println!("D(R, A09)     = {:.4}", discrepancy(&b, &a)?);
    println!(
        "plus inverse  = {:.4}",
        discrepancy_symmetric(&a, &b, SymmetricKind::PlusInverse)?
    );
    println!(
        "abs log       = {:.4}",
        discrepancy_symmetric(&a, &b, SymmetricKind::AbsLog)?
    );
    println!("D(A09, A09)   = {:.1e}", discrepancy(&a, &a)?);

    // A singular estimate is infinitely far from any positive definite target.
    let singular = SymMatrix::from_row_slice(2, &[1.0, 1.0, 1.0, 1.0])?;
    println!(
        "D(singular, I) = {}",
        discrepancy(&singular, &SymMatrix::identity(2))?
    );
    Ok(())
}
