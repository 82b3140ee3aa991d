//! Weekly lice-count exports: parsing, farming-period selection, and the two
//! calibration datasets (green segments and removal-count distributions).
//!
//! Column names follow a [`Schema`] mapping. The built-in schema accepts the
//! canonical snake-case names and the Norwegian names used by the public
//! weekly export; other exports are adapted with a TOML mapping file rather
//! than code changes.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiceRecord {
    pub locality_id: String,
    pub year: i32,
    /// ISO week number.
    pub week: u32,
    /// Adult female lice per fish; `None` when not reported.
    pub adult_female_lpf: Option<f64>,
    pub moving_lpf: Option<f64>,
    pub stuck_lpf: Option<f64>,
    pub mechanical: bool,
    pub medicinal: bool,
    pub cleanerfish: bool,
    pub region: String,
}

/// Logical columns of a lice export.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    LocalityId,
    Year,
    Week,
    AdultFemaleLpf,
    MovingLpf,
    StuckLpf,
    Mechanical,
    Medicinal,
    Cleanerfish,
    Region,
}

impl Field {
    pub const ALL: [Field; 10] = [
        Field::LocalityId,
        Field::Year,
        Field::Week,
        Field::AdultFemaleLpf,
        Field::MovingLpf,
        Field::StuckLpf,
        Field::Mechanical,
        Field::Medicinal,
        Field::Cleanerfish,
        Field::Region,
    ];

    pub fn canonical(self) -> &'static str {
        match self {
            Field::LocalityId => "locality_id",
            Field::Year => "year",
            Field::Week => "week",
            Field::AdultFemaleLpf => "adult_female_lpf",
            Field::MovingLpf => "moving_lpf",
            Field::StuckLpf => "stuck_lpf",
            Field::Mechanical => "mechanical_removal",
            Field::Medicinal => "medicinal_treatment",
            Field::Cleanerfish => "cleaner_fish",
            Field::Region => "region",
        }
    }

    fn required(self) -> bool {
        matches!(
            self,
            Field::LocalityId | Field::Year | Field::Week | Field::AdultFemaleLpf | Field::Region
        )
    }
}

/// Header-to-field mapping. Headers are matched case-insensitively after
/// trimming. Headers listed in `ignore` are accepted and dropped; any other
/// unmapped header is rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schema {
    pub columns: BTreeMap<String, Field>,
    pub ignore: Vec<String>,
    /// Field delimiter; detected from the header when `None`.
    pub delimiter: Option<char>,
}

impl Default for Schema {
    fn default() -> Self {
        let mut columns = BTreeMap::new();
        for f in Field::ALL {
            columns.insert(f.canonical().to_string(), f);
        }
        for (alias, f) in [
            ("lokalitetsnummer", Field::LocalityId),
            ("år", Field::Year),
            ("uke", Field::Week),
            ("voksne hunnlus", Field::AdultFemaleLpf),
            ("lus i bevegelige stadier", Field::MovingLpf),
            ("fastsittende lus", Field::StuckLpf),
            ("mekanisk fjerning", Field::Mechanical),
            ("medikamentell behandling", Field::Medicinal),
            ("rensefisk", Field::Cleanerfish),
            ("fylke", Field::Region),
        ] {
            columns.insert(alias.to_string(), f);
        }
        let ignore = [
            "lokalitetsnavn",
            "kommunenummer",
            "kommune",
            "fylkesnummer",
            "lat",
            "lon",
            "lusegrense uke",
            "over lusegrensen uke",
            "sjøtemperatur",
            "trolig uten fisk",
            "har telt lakselus",
            "produksjonsområde",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        Self { columns, ignore, delimiter: None }
    }
}

impl Schema {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut schema: Schema = toml::from_str(&text)?;
        schema.columns = schema.columns.into_iter().map(|(k, v)| (normalize_header(&k), v)).collect();
        schema.ignore = schema.ignore.iter().map(|h| normalize_header(h)).collect();
        Ok(schema)
    }

    fn expected(&self) -> Vec<String> {
        self.columns.keys().chain(self.ignore.iter()).cloned().collect()
    }

    fn resolve(&self, headers: &csv::StringRecord) -> Result<Vec<Option<Field>>> {
        let mut out = Vec::with_capacity(headers.len());
        let mut seen = HashMap::new();
        for h in headers {
            let key = normalize_header(h);
            if let Some(&f) = self.columns.get(&key) {
                if seen.insert(f, h.to_string()).is_some() {
                    return Err(Error::param("header", format!("column for `{}` appears twice", f.canonical())));
                }
                out.push(Some(f));
            } else if self.ignore.contains(&key) {
                out.push(None);
            } else {
                return Err(Error::UnknownColumn {
                    column: h.to_string(),
                    expected: self.expected(),
                });
            }
        }
        for f in Field::ALL {
            if f.required() && !seen.contains_key(&f) {
                return Err(Error::MissingColumn(f.canonical().to_string()));
            }
        }
        Ok(out)
    }
}

fn normalize_header(h: &str) -> String {
    h.trim().trim_start_matches('\u{feff}').to_lowercase()
}

/// Records parsed from one file plus the number of rows skipped as malformed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedLice {
    pub records: Vec<LiceRecord>,
    pub skipped_rows: usize,
}

fn parse_number(cell: &str) -> std::result::Result<Option<f64>, ()> {
    let c = cell.trim();
    if c.is_empty() || c.eq_ignore_ascii_case("na") || c == "-" {
        return Ok(None);
    }
    let v: f64 = c.replace(',', ".").parse().map_err(|_| ())?;
    if v.is_finite() && v >= 0.0 {
        Ok(Some(v))
    } else {
        Err(())
    }
}

fn parse_flag(cell: &str) -> std::result::Result<bool, ()> {
    match cell.trim().to_lowercase().as_str() {
        "" | "0" | "false" | "nei" | "no" | "n" => Ok(false),
        "1" | "true" | "ja" | "yes" | "y" | "x" => Ok(true),
        _ => Err(()),
    }
}

fn parse_row(fields: &[Option<Field>], row: &csv::StringRecord) -> std::result::Result<LiceRecord, ()> {
    let mut rec = LiceRecord {
        locality_id: String::new(),
        year: 0,
        week: 0,
        adult_female_lpf: None,
        moving_lpf: None,
        stuck_lpf: None,
        mechanical: false,
        medicinal: false,
        cleanerfish: false,
        region: String::new(),
    };
    if row.len() != fields.len() {
        return Err(());
    }
    for (f, cell) in fields.iter().zip(row) {
        let Some(f) = f else { continue };
        match f {
            Field::LocalityId => rec.locality_id = cell.trim().to_string(),
            Field::Year => rec.year = cell.trim().parse().map_err(|_| ())?,
            Field::Week => rec.week = cell.trim().parse().map_err(|_| ())?,
            Field::AdultFemaleLpf => rec.adult_female_lpf = parse_number(cell)?,
            Field::MovingLpf => rec.moving_lpf = parse_number(cell)?,
            Field::StuckLpf => rec.stuck_lpf = parse_number(cell)?,
            Field::Mechanical => rec.mechanical = parse_flag(cell)?,
            Field::Medicinal => rec.medicinal = parse_flag(cell)?,
            Field::Cleanerfish => rec.cleanerfish = parse_flag(cell)?,
            Field::Region => rec.region = cell.trim().to_string(),
        }
    }
    if rec.locality_id.is_empty() || week_index(rec.year, rec.week).is_none() {
        return Err(());
    }
    Ok(rec)
}

/// Parses a delimiter-separated export with a header row.
pub fn parse_lice<R: Read>(mut reader: R, schema: &Schema) -> Result<ParsedLice> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let delimiter = schema.delimiter.unwrap_or_else(|| {
        let header = text.lines().next().unwrap_or("");
        if header.contains(';') {
            ';'
        } else if header.contains('\t') {
            '\t'
        } else {
            ','
        }
    });
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter as u8)
        .flexible(true)
        .from_reader(text.as_bytes());
    let fields = schema.resolve(rdr.headers()?)?;
    let mut out = ParsedLice::default();
    for row in rdr.records() {
        match row.map_err(|_| ()).and_then(|r| parse_row(&fields, &r)) {
            Ok(rec) => out.records.push(rec),
            Err(()) => out.skipped_rows += 1,
        }
    }
    if out.skipped_rows > 0 {
        log::warn!("skipped {} malformed lice rows", out.skipped_rows);
    }
    Ok(out)
}

pub fn parse_lice_file(path: &Path, schema: &Schema) -> Result<ParsedLice> {
    parse_lice(std::fs::File::open(path)?, schema)
}

/// Writes records with the canonical header.
pub fn write_lice<W: Write>(records: &[LiceRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(Field::ALL.iter().map(|f| f.canonical()))?;
    let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let flag = |b: bool| if b { "1" } else { "0" };
    for r in records {
        w.write_record([
            r.locality_id.clone(),
            r.year.to_string(),
            r.week.to_string(),
            num(r.adult_female_lpf),
            num(r.moving_lpf),
            num(r.stuck_lpf),
            flag(r.mechanical).to_string(),
            flag(r.medicinal).to_string(),
            flag(r.cleanerfish).to_string(),
            r.region.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Continuous week counter: Monday of the ISO week in weeks since 1970.
/// `None` if the week does not exist in that ISO year.
pub fn week_index(year: i32, week: u32) -> Option<i64> {
    let monday = NaiveDate::from_isoywd_opt(year, week, Weekday::Mon)?;
    let epoch = NaiveDate::from_ymd_opt(1970, 1, 5)?;
    Some((monday - epoch).num_days().div_euclid(7))
}

pub(crate) fn iso_from_index(idx: i64) -> (i32, u32) {
    let d = NaiveDate::from_ymd_opt(1970, 1, 5).expect("valid date") + chrono::Duration::weeks(idx);
    let w = d.iso_week();
    (w.year(), w.week())
}

const REGION_ALIASES: &[(&str, &str)] = &[
    ("trøndelag", "Trøndelag"),
    ("trondelag", "Trøndelag"),
    ("troendelag", "Trøndelag"),
    ("sør-trøndelag", "Trøndelag"),
    ("nord-trøndelag", "Trøndelag"),
    ("møre og romsdal", "Møre og Romsdal"),
    ("more og romsdal", "Møre og Romsdal"),
    ("nordland", "Nordland"),
    ("troms og finnmark", "Troms og Finnmark"),
    ("troms", "Troms og Finnmark"),
    ("finnmark", "Troms og Finnmark"),
    ("vestland", "Vestland"),
    ("hordaland", "Vestland"),
    ("sogn og fjordane", "Vestland"),
    ("rogaland", "Rogaland"),
    ("agder", "Agder"),
    ("vest-agder", "Agder"),
    ("aust-agder", "Agder"),
];

/// Maps county-name variants to one spelling; unknown names are returned trimmed.
pub fn normalize_region(name: &str) -> String {
    let key = name.trim().to_lowercase();
    REGION_ALIASES
        .iter()
        .find(|(alias, _)| *alias == key)
        .map(|(_, canon)| canon.to_string())
        .unwrap_or_else(|| name.trim().to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarmingPeriod {
    pub locality_id: String,
    pub region: String,
    /// ISO (year, week) of the first reporting week.
    pub start: (i32, u32),
    pub end: (i32, u32),
    pub records: Vec<LiceRecord>,
    /// Week offsets from `start` of weeks with a mechanical removal.
    pub mechanical_times: Vec<u32>,
}

impl FarmingPeriod {
    pub fn n_weeks(&self) -> u32 {
        let s = week_index(self.start.0, self.start.1).expect("valid start");
        let e = week_index(self.end.0, self.end.1).expect("valid end");
        (e - s) as u32 + 1
    }

    fn offset(&self, r: &LiceRecord) -> u32 {
        let s = week_index(self.start.0, self.start.1).expect("valid start");
        (week_index(r.year, r.week).expect("validated") - s) as u32
    }

    /// Cumulative removal count up to and including `t` years after the start.
    pub fn removals_until(&self, t: f64) -> u32 {
        self.mechanical_times.iter().filter(|&&k| k as f64 <= 52.0 * t + 1e-9).count() as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct PeriodOptions {
    /// Weeks without lice reporting that end a farming period.
    pub gap_weeks: u32,
}

impl Default for PeriodOptions {
    fn default() -> Self {
        Self { gap_weeks: 4 }
    }
}

/// Splits each locality's records into farming periods and keeps those in
/// `region` with mechanical removals only.
pub fn select_mechanical_only_periods(records: &[LiceRecord], region: &str, opts: &PeriodOptions) -> Vec<FarmingPeriod> {
    let region = normalize_region(region);
    let mut by_site: BTreeMap<&str, BTreeMap<i64, &LiceRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| normalize_region(&r.region) == region) {
        if let Some(idx) = week_index(r.year, r.week) {
            // Duplicate weeks keep the first row.
            by_site.entry(&r.locality_id).or_default().entry(idx).or_insert(r);
        }
    }
    let mut periods = Vec::new();
    for (site, weeks) in by_site {
        let reporting: Vec<i64> = weeks
            .iter()
            .filter(|(_, r)| r.adult_female_lpf.is_some())
            .map(|(&i, _)| i)
            .collect();
        let mut start = 0;
        while start < reporting.len() {
            let mut end = start;
            while end + 1 < reporting.len() && reporting[end + 1] - reporting[end] - 1 < opts.gap_weeks as i64 {
                end += 1;
            }
            let (s, e) = (reporting[start], reporting[end]);
            let recs: Vec<LiceRecord> = weeks.range(s..=e).map(|(_, r)| (*r).clone()).collect();
            start = end + 1;
            if recs.iter().any(|r| r.medicinal || r.cleanerfish) {
                continue;
            }
            let mechanical_times = weeks
                .range(s..=e)
                .filter(|(_, r)| r.mechanical)
                .map(|(&i, _)| (i - s) as u32)
                .collect();
            periods.push(FarmingPeriod {
                locality_id: site.to_string(),
                region: region.clone(),
                start: iso_from_index(s),
                end: iso_from_index(e),
                records: recs,
                mechanical_times,
            });
        }
    }
    periods
}

/// Lice-per-fish observations of a period before its first mechanical removal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenSegment {
    pub locality_id: String,
    /// Week offsets from the period start.
    pub weeks: Vec<u32>,
    pub lpf: Vec<f64>,
}

impl GreenSegment {
    /// Observation times in years (`week / 52`).
    pub fn times(&self) -> Vec<f64> {
        self.weeks.iter().map(|&k| k as f64 / 52.0).collect()
    }

    pub fn len(&self) -> usize {
        self.weeks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weeks.is_empty()
    }
}

/// Prefix of each period up to (excluding) the first mechanical removal,
/// ending early at the first week without a lice count. Periods without a
/// removal or with an empty prefix give no segment.
pub fn extract_green_segments(periods: &[FarmingPeriod]) -> Vec<GreenSegment> {
    periods
        .iter()
        .filter_map(|p| {
            let first = *p.mechanical_times.first()?;
            let by_offset: HashMap<u32, Option<f64>> =
                p.records.iter().map(|r| (p.offset(r), r.adult_female_lpf)).collect();
            let mut seg = GreenSegment {
                locality_id: p.locality_id.clone(),
                weeks: Vec::new(),
                lpf: Vec::new(),
            };
            for k in 0..first {
                match by_offset.get(&k) {
                    Some(Some(v)) => {
                        seg.weeks.push(k);
                        seg.lpf.push(*v);
                    }
                    _ => break,
                }
            }
            (!seg.is_empty()).then_some(seg)
        })
        .collect()
}

/// Empirical distribution of cumulative removal counts at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovalDistribution {
    /// Years since period start.
    pub t: f64,
    pub counts: Vec<u32>,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl RemovalDistribution {
    pub fn from_counts(t: f64, counts: Vec<u32>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::EmptyInput("removal distribution needs at least one count".into()));
        }
        let (mean, std) = count_moments(&counts);
        Ok(Self { t, counts, mean, std })
    }

    /// `(count, frequency)` pairs for every count from zero to the maximum.
    pub fn histogram(&self) -> Vec<(u32, usize)> {
        let max = self.counts.iter().copied().max().unwrap_or(0);
        let mut h = vec![0usize; max as usize + 1];
        for &c in &self.counts {
            h[c as usize] += 1;
        }
        h.into_iter().enumerate().map(|(c, n)| (c as u32, n)).collect()
    }
}

pub fn count_moments(counts: &[u32]) -> (f64, f64) {
    let n = counts.len() as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn removal_distribution_at(periods: &[FarmingPeriod], t: f64) -> Result<RemovalDistribution> {
    if !(t >= 0.0) {
        return Err(Error::param("t", "must be non-negative"));
    }
    if periods.is_empty() {
        return Err(Error::EmptyInput("no farming periods".into()));
    }
    RemovalDistribution::from_counts(t, periods.iter().map(|p| p.removals_until(t)).collect())
}

/// Long-format segment table: `locality_id,segment,week,t,lpf`.
pub fn write_segments_csv<W: Write>(segments: &[GreenSegment], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["locality_id", "segment", "week", "t", "lpf"])?;
    for (i, s) in segments.iter().enumerate() {
        for (&k, &v) in s.weeks.iter().zip(&s.lpf) {
            w.write_record([
                s.locality_id.clone(),
                i.to_string(),
                k.to_string(),
                (k as f64 / 52.0).to_string(),
                v.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct SegmentRow {
    locality_id: String,
    segment: usize,
    week: u32,
    lpf: f64,
}

pub fn read_segments_csv<R: Read>(reader: R) -> Result<Vec<GreenSegment>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out: Vec<GreenSegment> = Vec::new();
    let mut last: Option<usize> = None;
    for row in rdr.deserialize() {
        let row: SegmentRow = row?;
        if last != Some(row.segment) {
            out.push(GreenSegment {
                locality_id: row.locality_id.clone(),
                weeks: Vec::new(),
                lpf: Vec::new(),
            });
            last = Some(row.segment);
        }
        let s = out.last_mut().expect("pushed above");
        s.weeks.push(row.week);
        s.lpf.push(row.lpf);
    }
    Ok(out)
}

/// Loads segments from `.json` or long-format `.csv`.
pub fn load_segments(path: &Path) -> Result<Vec<GreenSegment>> {
    let f = std::fs::File::open(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
    } else {
        read_segments_csv(f)
    }
}
