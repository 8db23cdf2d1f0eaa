//! Estimate, then render the flagged cells as an SVG cellmap.

use cellwise::cli::{cellmap_grid, cellmap_svg, CellClass};
use cellwise::evalkit::{contaminate_cellwise, gaussian_sample, gen_a09, substream, Stream};
use cellwise::io::report_rows;
use cellwise::{di_estimate, ContaminationMode, ContaminationSpec, DiConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (n, d) = (40, 8);
    let sigma = gen_a09(d);
    let clean = gaussian_sample(n, &sigma, &mut substream(5, 0, Stream::Data))?;
    let spec = ContaminationSpec {
        epsilon: 0.1,
        gamma: 6.0,
        mode: ContaminationMode::Cellwise,
        seed: 5,
    };
    let data = contaminate_cellwise(&clean, &sigma, &spec)?.data;
    let fit = di_estimate(&data, &DiConfig::default())?;
    let report = report_rows(&fit.flagged_cells(&data), data.names(), &fit.columns);

    let grid = cellmap_grid(&report, n, d, false)?;
    for row in &grid {
        let line: String = row
            .iter()
            .map(|(c, _)| match c {
                CellClass::Regular => '.',
                CellClass::High => '+',
                CellClass::Low => '-',
                CellClass::Missing => '?',
            })
            .collect();
        println!("{line}");
    }
    let path = std::env::temp_dir().join("cellmap.svg");
    std::fs::write(&path, cellmap_svg(&grid))?;
    println!("wrote {}", path.display());
    Ok(())
}
