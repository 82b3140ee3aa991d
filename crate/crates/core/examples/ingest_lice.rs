//! Parses a weekly lice export with the Norwegian column names, selects the
//! mechanical-only farming periods and extracts the calibration datasets.

use aquaval::ingest::{
    extract_green_segments, parse_lice, removal_distribution_at, select_mechanical_only_periods, PeriodOptions, Schema,
};

fn main() -> aquaval::Result<()> {
    let mut text = String::from("Uke;År;Lokalitetsnummer;Lokalitetsnavn;Voksne hunnlus;Mekanisk fjerning;Rensefisk;Fylke\n");
    for (site, cleaner) in [("11001", false), ("11002", true)] {
        for k in 0..40u32 {
            let lpf = 0.001 * (6.9 * k as f64 / 52.0).exp();
            let mech = k == 18 || k == 30;
            let cf = cleaner && k == 25;
            text.push_str(&format!(
                "{};2021;{site};Vik;{};{};{};Trøndelag\n",
                k + 1,
                format!("{lpf:.4}").replace('.', ","),
                if mech { "ja" } else { "nei" },
                if cf { "ja" } else { "nei" }
            ));
        }
    }
    let parsed = parse_lice(text.as_bytes(), &Schema::default())?;
    println!("{} records, {} skipped", parsed.records.len(), parsed.skipped_rows);
    let periods = select_mechanical_only_periods(&parsed.records, "Trondelag", &PeriodOptions::default());
    for p in &periods {
        println!("period {} {:?}..{:?} removals at weeks {:?}", p.locality_id, p.start, p.end, p.mechanical_times);
    }
    for s in extract_green_segments(&periods) {
        println!("green segment {}: {} weeks, last lpf {:.3}", s.locality_id, s.len(), s.lpf.last().unwrap());
    }
    let d = removal_distribution_at(&periods, 35.0 / 52.0)?;
    println!("removals by week 35: {:?}", d.counts);
    Ok(())
}
