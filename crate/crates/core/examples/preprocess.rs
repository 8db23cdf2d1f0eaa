//! Log and centered log-ratio transforms of a small compositional table.

use cellwise::estimator::{clr_transform, log_transform};
use cellwise::DataTable;

fn main() -> cellwise::Result<()> {
    let names = vec!["a".to_string(), "b".to_string(), "c".to_string()];
    // The second row is the first one diluted by a factor of 10.
    let table = DataTable::from_rows(
        names,
        &[
            vec![2.0, 4.0, 8.0],
            vec![0.2, 0.4, 0.8],
            vec![5.0, f64::NAN, 1.0],
        ],
    )?;
    print!("log\n{}", cellwise::io::write_csv(&log_transform(&table)?)?);
    print!("clr\n{}", cellwise::io::write_csv(&clr_transform(&table)?)?);

    let bad = DataTable::from_rows(vec!["x".into()], &[vec![0.0]])?;
    if let Err(e) = log_transform(&bad) {
        println!("rejected: {e}");
    }
    Ok(())
}
