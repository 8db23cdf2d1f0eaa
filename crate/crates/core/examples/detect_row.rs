//! Flag the outlying cells of a single row under a known Gaussian model.

use cellwise::{handle_row, CovModel, SymMatrix};

fn main() -> cellwise::Result<()> {
    // Two strongly correlated pairs.
    let sigma = SymMatrix::from_row_slice(
        4,
        &[
            1.0, 0.9, 0.0, 0.0, //
            0.9, 1.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, -0.8, //
            0.0, 0.0, -0.8, 1.0,
        ],
    )?;
    let model = CovModel::new(vec![0.0; 4], sigma)?;
    let q = cellwise::numkit::chi2_quantile(1, 0.99)?;

    // Each value is unremarkable on its own; the second breaks the correlation with the first.
    let row = [1.8, -1.5, 0.3, f64::NAN];
    let det = handle_row(&row, &model, q)?;

    println!("cutoff {q:.4}");
    println!(
        "{:>4} {:>8} {:>9} {:>9} {:>10}",
        "cell", "value", "imputed", "residual", "criterion"
    );
    for (j, value) in row.iter().enumerate() {
        println!(
            "{j:>4} {value:>8.3} {:>9.3} {:>9.3} {:>10.3}{}",
            det.cleaned[j],
            det.residuals[j],
            det.criteria[j],
            if det.is_flagged(j) { "  flagged" } else { "" }
        );
    }
    println!("path order {:?}", det.path_order);
    Ok(())
}
