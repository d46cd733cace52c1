//! Response classes over a (beta, gamma) grid, as text and as an SVG.
//!
//! cargo run --release --example region_map [out.svg]

use icbsim::experiments::{region_map, AxisSpec};
use icbsim::io::emit_svg_region_map;
use icbsim::metrics::RunSettings;
use icbsim::{baseline_params, ParamId, ResponseClass};

fn main() -> icbsim::Result<()> {
    let beta = AxisSpec::new(ParamId::Beta, 0.00898, 0.00902, 9);
    let gamma = AxisSpec::new(ParamId::Gamma, 37.395, 37.425, 13);
    let map = region_map(&baseline_params(), beta, gamma, &RunSettings::default())?;

    println!("rows: beta (top = largest), columns: gamma {:.3} .. {:.3}", gamma.lo, gamma.hi);
    println!("N = no response, D = delayed, Q = quick full, P = quick partial");
    for (r, row) in map.classes.iter().enumerate().rev() {
        let cells: String = row
            .iter()
            .map(|c| match c {
                Some(ResponseClass::NoResponse) => 'N',
                Some(ResponseClass::Delayed) => 'D',
                Some(ResponseClass::QuickFull) => 'Q',
                Some(ResponseClass::QuickPartial) => 'P',
                None => '?',
            })
            .collect();
        println!("{:.6}  {cells}  band {:.4}", beta.values()[r], map.band_width[r]);
    }

    let path = std::env::args().nth(1).unwrap_or_else(|| "region_map.svg".into());
    std::fs::write(&path, emit_svg_region_map(&map, Some("Response class over (beta, gamma)"))?)?;
    println!("wrote {path}");
    Ok(())
}
