//! Print which cells of a bivariate point get flagged, over a grid.

use cellwise::{flag_domain_scan, CovModel, FlagLabel, GridSpec, SymMatrix};

fn main() -> cellwise::Result<()> {
    let q = cellwise::numkit::chi2_quantile(1, 0.99)?;
    let grid = GridSpec {
        lo: -4.0,
        hi: 4.0,
        points: 33,
    };
    for rho in [0.0, 0.9] {
        let model = CovModel::new(
            vec![0.0, 0.0],
            SymMatrix::from_row_slice(2, &[1.0, rho, rho, 1.0])?,
        )?;
        let scan = flag_domain_scan(&model, &grid, q)?;
        println!("rho = {rho}  (. none, x first, y second, # both; x across, y up)");
        for b in (0..scan.coords.len()).rev() {
            let line: String = (0..scan.coords.len())
                .map(|a| match scan.labels[a][b] {
                    FlagLabel::None => '.',
                    FlagLabel::First => 'x',
                    FlagLabel::Second => 'y',
                    FlagLabel::Both => '#',
                })
                .collect();
            println!("  {line}");
        }
        println!();
    }
    Ok(())
}
