//! CSV and Markdown artifacts of an analysis run.

use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::Deserialize;

use crate::analysis::{
    ConsistencyChain, CrossLevelRecord, DefaultReport, ExtentMatch, Histogram, ThresholdFlag,
};
use crate::hierarchy::{Level, RegionHierarchy};
use crate::similarity::Measure;

/// `%.17g`: 17 significant digits, enough to round-trip any `f64`.
pub fn format_g17(v: f64) -> String {
    if v == 0.0 {
        return "0".to_owned();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();

    if !(-4..17).contains(&exp) {
        let mut m = format!("{}.{}", &digits[..1], &digits[1..]);
        while m.ends_with('0') {
            m.pop();
        }
        if m.ends_with('.') {
            m.pop();
        }
        let esign = if exp < 0 { '-' } else { '+' };
        return format!("{sign}{m}e{esign}{:02}", exp.abs());
    }

    let mut out = String::from(sign);
    if exp >= 0 {
        let split = exp as usize + 1;
        out.push_str(&digits[..split]);
        let frac = digits[split..].trim_end_matches('0');
        if !frac.is_empty() {
            out.push('.');
            out.push_str(frac);
        }
    } else {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', (-exp - 1) as usize));
        out.push_str(digits.trim_end_matches('0'));
    }
    out
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

pub fn write_records_csv<W: Write>(w: W, records: &[CrossLevelRecord]) -> csv::Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["ancestor_code", "descendant_code", "descendant_level", "mse", "ssim"])?;
    for r in records {
        out.write_record([
            r.ancestor_code.as_str(),
            &r.descendant_code,
            r.descendant_level.as_str(),
            &format_g17(r.mse),
            &format_g17(r.ssim),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct RawRecord {
    ancestor_code: String,
    descendant_code: String,
    descendant_level: String,
    mse: f64,
    ssim: f64,
}

/// Reads `records.csv`. Errors carry the 1-based line number.
pub fn read_records_csv<R: Read>(r: R) -> Result<Vec<CrossLevelRecord>, String> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for (i, raw) in rdr.deserialize::<RawRecord>().enumerate() {
        let line = i + 2;
        let raw = raw.map_err(|e| format!("records line {line}: {e}"))?;
        let level: Level = raw
            .descendant_level
            .parse()
            .map_err(|e| format!("records line {line}: {e}"))?;
        out.push(CrossLevelRecord {
            ancestor_code: raw.ancestor_code,
            descendant_code: raw.descendant_code,
            descendant_level: level,
            mse: raw.mse,
            ssim: raw.ssim,
        });
    }
    if out.is_empty() {
        return Err("records file has no rows".into());
    }
    Ok(out)
}

pub fn write_defaults_csv<W: Write>(w: W, reports: &[DefaultReport]) -> csv::Result<()> {
    let mut out = csv_writer(w);
    out.write_record([
        "ancestor",
        "level",
        "measure",
        "most_code",
        "most_value",
        "least_code",
        "least_value",
        "candidate_count",
    ])?;
    for r in reports {
        out.write_record([
            r.ancestor_code.as_str(),
            r.level.as_str(),
            r.measure.as_str(),
            &r.most_similar.code,
            &format_g17(r.most_similar.value),
            &r.least_similar.code,
            &format_g17(r.least_similar.value),
            &r.candidate_count.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_histogram_csv<W: Write>(w: W, h: &Histogram) -> csv::Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["bin_left_edge", "count"])?;
    for (edge, count) in h.bins() {
        out.write_record([format_g17(edge), count.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_matches_csv<W: Write>(w: W, matches: &[ExtentMatch]) -> csv::Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["level", "measure", "default_code", "most_forested_code", "matched"])?;
    for m in matches {
        out.write_record([
            m.level.as_str(),
            m.measure.as_str(),
            &m.default_code,
            &m.most_forested_code,
            if m.matched { "true" } else { "false" },
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_consistency_csv<W: Write>(w: W, chains: &[ConsistencyChain]) -> csv::Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["measure", "extremum", "level", "region_code", "in_longest_run"])?;
    for c in chains {
        let extremum = match c.extremum {
            crate::analysis::Extremum::Most => "most",
            crate::analysis::Extremum::Least => "least",
        };
        for entry in &c.sequence {
            let in_run = c.longest_hierarchical_run.contains(entry);
            out.write_record([
                c.measure.as_str(),
                extremum,
                entry.0.as_str(),
                &entry.1,
                if in_run { "true" } else { "false" },
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Value as printed in the report tables: whole numbers for MSE, two
/// decimals for SSIM.
pub fn display_value(measure: Measure, v: f64) -> String {
    match measure {
        Measure::Mse => format!("{v:.0}"),
        Measure::Ssim => format!("{v:.2}"),
    }
}

/// Where the tail threshold came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdSource {
    Fence(f64),
    Override(f64),
    None,
}

impl ThresholdSource {
    pub fn value(self) -> Option<f64> {
        match self {
            ThresholdSource::Fence(v) | ThresholdSource::Override(v) => Some(v),
            ThresholdSource::None => None,
        }
    }
}

/// Everything the Markdown report shows.
pub struct ReportInputs<'a> {
    pub hierarchy: &'a RegionHierarchy,
    pub ancestor: &'a str,
    pub reports: &'a [DefaultReport],
    pub chains: &'a [ConsistencyChain],
    pub n_observations: usize,
    pub threshold: ThresholdSource,
    pub flags: &'a [ThresholdFlag],
    pub matches: &'a [ExtentMatch],
}

fn name_of(h: &RegionHierarchy, code: &str) -> String {
    h.get(code).map_or_else(|| code.to_owned(), |n| n.name.clone())
}

/// Human-readable summary. Levels run top-down and MSE precedes SSIM.
pub fn render_markdown(x: &ReportInputs<'_>) -> String {
    let h = x.hierarchy;
    let mut md = String::new();
    let _ = writeln!(md, "# Regional defaults for {} ({})\n", name_of(h, x.ancestor), x.ancestor);

    let _ = writeln!(md, "## Most and least similar regions\n");
    let _ = writeln!(
        md,
        "| Level | Most similar (MSE) | Most similar (SSIM) | Least similar (MSE) | Least similar (SSIM) |"
    );
    let _ = writeln!(md, "|---|---|---|---|---|");
    let mut levels: Vec<Level> = x.reports.iter().map(|r| r.level).collect();
    levels.dedup();
    for level in &levels {
        let find = |m: Measure| x.reports.iter().find(|r| r.level == *level && r.measure == m);
        let cell = |m: Measure, most: bool| {
            find(m).map_or_else(String::new, |r| {
                let e = if most { &r.most_similar } else { &r.least_similar };
                format!("{} ({})", name_of(h, &e.code), display_value(m, e.value))
            })
        };
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} |",
            level.label(),
            cell(Measure::Mse, true),
            cell(Measure::Ssim, true),
            cell(Measure::Mse, false),
            cell(Measure::Ssim, false)
        );
    }

    let _ = writeln!(md, "\n## Consistency across levels\n");
    for c in x.chains {
        let names = |seq: &[(Level, String)]| {
            seq.iter()
                .map(|(_, code)| name_of(h, code))
                .collect::<Vec<_>>()
                .join(" -> ")
        };
        let what = match c.extremum {
            crate::analysis::Extremum::Most => "most similar",
            crate::analysis::Extremum::Least => "least similar",
        };
        let _ = writeln!(
            md,
            "- {} {}: {}; longest hierarchical run ({}): {}",
            c.measure,
            what,
            names(&c.sequence),
            c.run_length(),
            names(&c.longest_hierarchical_run)
        );
    }

    let _ = writeln!(md, "\n## Regional-default degree\n");
    let _ = writeln!(md, "- observations: {}", x.n_observations);
    let _ = match x.threshold {
        ThresholdSource::Fence(t) => writeln!(md, "- SSIM threshold (Tukey upper fence): {t:.4}"),
        ThresholdSource::Override(t) => writeln!(md, "- SSIM threshold (override): {t:.4}"),
        ThresholdSource::None => writeln!(md, "- SSIM threshold: none (no right tail)"),
    };
    if x.threshold.value().is_some() {
        let _ = writeln!(md, "\n| Level | SSIM default | Value | Default stands |");
        let _ = writeln!(md, "|---|---|---|---|");
        for f in x.flags {
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} |",
                f.level.label(),
                name_of(h, &f.code),
                display_value(Measure::Ssim, f.value),
                if f.default_exists { "yes" } else { "no" }
            );
        }
    }

    let _ = writeln!(md, "\n## Forest extent\n");
    if x.matches.is_empty() {
        let _ = writeln!(md, "No forest-extent rows for these levels.");
    } else {
        let _ = writeln!(md, "| Level | Measure | Default | Most forested | Match |");
        let _ = writeln!(md, "|---|---|---|---|---|");
        for m in x.matches {
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} | {} |",
                m.level.label(),
                m.measure,
                name_of(h, &m.default_code),
                name_of(h, &m.most_forested_code),
                if m.matched { "yes" } else { "no" }
            );
        }
    }
    md
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_formatting() {
        assert_eq!(format_g17(4323.0), "4323");
        assert_eq!(format_g17(0.3), "0.29999999999999999");
        assert_eq!(format_g17(-1.0), "-1");
        assert_eq!(format_g17(0.0), "0");
        assert_eq!(format_g17(0.25), "0.25");
        assert_eq!(format_g17(1e-5), "1.0000000000000001e-05");
        assert_eq!(format_g17(1e20), "1e+20");
        assert_eq!(format_g17(0.00012), "0.00012");
        assert_eq!(format_g17(123456.5), "123456.5");
    }

    #[test]
    fn g17_round_trips() {
        for v in [0.1, 1.0 / 3.0, 9.9989e-5, 65025.0, -0.07, 1e300, 5e-324, 0.123456789012345] {
            assert_eq!(format_g17(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn records_round_trip() {
        let recs = vec![CrossLevelRecord {
            ancestor_code: "001".into(),
            descendant_code: "019".into(),
            descendant_level: Level::UnRegion,
            mse: 4323.0,
            ssim: 0.1,
        }];
        let mut buf = Vec::new();
        write_records_csv(&mut buf, &recs).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "ancestor_code,descendant_code,descendant_level,mse,ssim\n001,019,un_region,4323,0.10000000000000001\n"
        );
        assert_eq!(read_records_csv(&buf[..]).unwrap(), recs);
        assert!(read_records_csv("ancestor_code,descendant_code,descendant_level,mse,ssim\n".as_bytes()).is_err());
        assert!(read_records_csv("ancestor_code,descendant_code,descendant_level,mse,ssim\n001,X,planet,1,1\n".as_bytes()).is_err());
    }
}
