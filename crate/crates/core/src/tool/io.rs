//! On-disk formats.
//!
//! - Path-loss CSV: header `dist_m,pl_db[,elev_deg,env,link]`, LF or CRLF.
//!   Empty optional cells mean "not given".
//! - I/Q hex capture: whitespace-separated 16-bit two's-complement hex words
//!   alternating I and Q, conventionally one `IIII QQQQ` pair per line,
//!   scaled by 1/32768 (so `7FFF` is 0.99997 and `8000` is -1).
//! - Sweep CSV: header `azimuth_deg,rssi_dbm`, 12 rows.
//! - Tap profile: CSV `delay_ns,amp_re,amp_im,class` or JSON array of the
//!   same records.
//!
//! Floats are written in Rust's shortest round-trip form, so writing and
//! reading back is exact.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::angular::{SectorReading, SectorSweep};
use crate::error::{Error, Result};
use crate::fitting::{Environment, LinkType, PathLossSample};
use crate::ofdm::{SampleStream, StreamOrigin};
use crate::synth::{MultipathProfile, TapRecord};

/// Writes `bytes` to a temp file beside `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes())
}

fn headers(path: &Path, rdr: &mut csv::Reader<&[u8]>) -> Result<Vec<String>> {
    let h = rdr.headers().map_err(|e| parse_err(path, 1, e.to_string()))?;
    Ok(h.iter().map(str::to_string).collect())
}

fn record_line(rec: &csv::StringRecord) -> usize {
    rec.position().map_or(0, |p| p.line() as usize)
}

fn env_name(e: Environment) -> &'static str {
    match e {
        Environment::Larch => "larch",
        Environment::Birch => "birch",
        Environment::Other => "other",
    }
}

fn link_name(l: LinkType) -> &'static str {
    match l {
        LinkType::G2G => "g2g",
        LinkType::A2G => "a2g",
    }
}

pub fn read_pathloss_csv(path: &Path) -> Result<Vec<PathLossSample>> {
    let text = read_text(path)?;
    let mut rdr = csv_reader(&text);
    let h = headers(path, &mut rdr)?;
    const COLS: [&str; 5] = ["dist_m", "pl_db", "elev_deg", "env", "link"];
    if h.len() < 2 || h.len() > COLS.len() || h.iter().zip(COLS).any(|(a, b)| a != b) {
        return Err(parse_err(
            path,
            1,
            format!("header must be a prefix of `{}` with at least two columns, got `{}`", COLS.join(","), h.join(",")),
        ));
    }
    let mut out = vec![];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(path, e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = record_line(&rec);
        if rec.len() != h.len() {
            return Err(parse_err(path, line, format!("expected {} fields, got {}", h.len(), rec.len())));
        }
        let float = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(path, line, format!("{} `{}` is not a finite number", COLS[i], &rec[i])))
        };
        let mut s = PathLossSample::new(float(0)?, float(1)?);
        if s.dist_m <= 0.0 {
            return Err(parse_err(path, line, format!("dist_m must be positive, got {}", s.dist_m)));
        }
        if rec.len() > 2 && !rec[2].is_empty() {
            let e = float(2)?;
            if !(0.0..=90.0).contains(&e) {
                return Err(parse_err(path, line, format!("elev_deg {e} outside [0, 90]")));
            }
            s.elev_deg = Some(e);
        }
        if rec.len() > 3 && !rec[3].is_empty() {
            s.env = match rec[3].to_ascii_lowercase().as_str() {
                "larch" => Environment::Larch,
                "birch" => Environment::Birch,
                "other" => Environment::Other,
                other => return Err(parse_err(path, line, format!("unknown env `{other}`"))),
            };
        }
        if rec.len() > 4 && !rec[4].is_empty() {
            s.link = match rec[4].to_ascii_lowercase().as_str() {
                "g2g" => LinkType::G2G,
                "a2g" => LinkType::A2G,
                other => return Err(parse_err(path, line, format!("unknown link `{other}`"))),
            };
        }
        out.push(s);
    }
    if out.is_empty() {
        return Err(Error::arity(format!("{} holds no samples", path.display())));
    }
    Ok(out)
}

pub fn pathloss_csv_string(samples: &[PathLossSample]) -> String {
    let mut s = String::from("dist_m,pl_db,elev_deg,env,link\n");
    for x in samples {
        let elev = x.elev_deg.map(|e| e.to_string()).unwrap_or_default();
        writeln!(s, "{},{},{elev},{},{}", x.dist_m, x.pl_db, env_name(x.env), link_name(x.link)).unwrap();
    }
    s
}

pub fn write_pathloss_csv(path: &Path, samples: &[PathLossSample]) -> Result<()> {
    write_atomic(path, pathloss_csv_string(samples).as_bytes())
}

/// Full scale of the 16-bit capture words.
pub const IQ_SCALE: f64 = 32768.0;

pub fn read_iq_hex(path: &Path, fs_hz: f64) -> Result<SampleStream> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_iq_hex(&bytes, fs_hz, path)
}

/// Parses hex capture bytes; `path` is only used in error records.
pub fn parse_iq_hex(bytes: &[u8], fs_hz: f64, path: &Path) -> Result<SampleStream> {
    let err = |offset: usize, message: String| Error::HexParse {
        path: path.to_path_buf(),
        offset,
        message,
    };
    let mut words = vec![];
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        let tok = &bytes[start..i];
        let text = std::str::from_utf8(tok).map_err(|_| err(start, "token is not ASCII hex".into()))?;
        if tok.len() != 4 || !tok.iter().all(u8::is_ascii_hexdigit) {
            return Err(err(start, format!("expected a 4-digit hex word, got `{text}`")));
        }
        let w = u16::from_str_radix(text, 16).expect("validated hex");
        words.push((w as i16, start));
    }
    if words.len() % 2 != 0 {
        let (_, at) = words[words.len() - 1];
        return Err(err(at, format!("odd number of words ({}): I without Q", words.len())));
    }
    let samples = words
        .chunks_exact(2)
        .map(|p| Complex64::new(p[0].0 as f64 / IQ_SCALE, p[1].0 as f64 / IQ_SCALE))
        .collect();
    Ok(SampleStream::new(samples, fs_hz, StreamOrigin::Rx))
}

fn quantize(x: f64) -> u16 {
    ((x * IQ_SCALE).round().clamp(-IQ_SCALE, IQ_SCALE - 1.0) as i16) as u16
}

/// Hex capture text, one `IIII QQQQ` line per sample. Values outside
/// [-1, 1) saturate.
pub fn iq_hex_string(stream: &SampleStream) -> String {
    let mut s = String::with_capacity(stream.len() * 10);
    for c in &stream.samples {
        writeln!(s, "{:04X} {:04X}", quantize(c.re), quantize(c.im)).unwrap();
    }
    s
}

pub fn write_iq_hex(path: &Path, stream: &SampleStream) -> Result<()> {
    write_atomic(path, iq_hex_string(stream).as_bytes())
}

pub fn read_sweep_csv(path: &Path) -> Result<SectorSweep> {
    let text = read_text(path)?;
    let mut rdr = csv_reader(&text);
    let h = headers(path, &mut rdr)?;
    if h != ["azimuth_deg", "rssi_dbm"] {
        return Err(parse_err(path, 1, format!("header must be `azimuth_deg,rssi_dbm`, got `{}`", h.join(","))));
    }
    let mut readings = vec![];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(path, e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = record_line(&rec);
        if rec.len() != 2 {
            return Err(parse_err(path, line, format!("expected 2 fields, got {}", rec.len())));
        }
        let v = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(path, line, format!("`{}` is not a finite number", &rec[i])))
        };
        readings.push(SectorReading { azimuth_deg: v(0)?, rssi_dbm: v(1)? });
    }
    SectorSweep::new(readings)
}

pub fn write_sweep_csv(path: &Path, sweep: &SectorSweep) -> Result<()> {
    let mut s = String::from("azimuth_deg,rssi_dbm\n");
    for r in &sweep.readings {
        writeln!(s, "{},{}", r.azimuth_deg, r.rssi_dbm).unwrap();
    }
    write_atomic(path, s.as_bytes())
}

fn class_name(c: crate::synth::TapClass) -> &'static str {
    match c {
        crate::synth::TapClass::Los => "los",
        crate::synth::TapClass::Cluster => "cluster",
        crate::synth::TapClass::Scatter => "scatter",
    }
}

pub fn profile_csv_string(profile: &MultipathProfile) -> String {
    let mut s = String::from("delay_ns,amp_re,amp_im,class\n");
    for r in profile.records() {
        writeln!(s, "{},{},{},{}", r.delay_ns, r.amp_re, r.amp_im, class_name(r.class)).unwrap();
    }
    s
}

pub fn write_profile(path: &Path, profile: &MultipathProfile) -> Result<()> {
    if path.extension().is_some_and(|e| e == "json") {
        write_json(path, &profile.records())
    } else {
        write_atomic(path, profile_csv_string(profile).as_bytes())
    }
}

pub fn read_profile(path: &Path) -> Result<MultipathProfile> {
    let text = read_text(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        let records: Vec<TapRecord> = serde_json::from_str(&text)?;
        return MultipathProfile::from_records(&records);
    }
    let mut rdr = csv_reader(&text);
    let h = headers(path, &mut rdr)?;
    if h != ["delay_ns", "amp_re", "amp_im", "class"] {
        return Err(parse_err(path, 1, format!("header must be `delay_ns,amp_re,amp_im,class`, got `{}`", h.join(","))));
    }
    let mut records = vec![];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(path, e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = record_line(&rec);
        if rec.len() != 4 {
            return Err(parse_err(path, line, format!("expected 4 fields, got {}", rec.len())));
        }
        let v = |i: usize| -> Result<f64> {
            rec[i].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| parse_err(path, line, format!("`{}` is not a finite number", &rec[i])))
        };
        let class = match &rec[3] {
            "los" => crate::synth::TapClass::Los,
            "cluster" => crate::synth::TapClass::Cluster,
            "scatter" => crate::synth::TapClass::Scatter,
            other => return Err(parse_err(path, line, format!("unknown tap class `{other}`"))),
        };
        records.push(TapRecord { delay_ns: v(0)?, amp_re: v(1)?, amp_im: v(2)?, class });
    }
    MultipathProfile::from_records(&records)
}

/// Numeric table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: vec![],
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Table> {
        let text = read_text(path)?;
        let mut rdr = csv_reader(&text);
        let columns = headers(path, &mut rdr)?;
        let mut rows = vec![];
        for rec in rdr.records() {
            let rec = rec.map_err(|e| parse_err(path, e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
            let line = record_line(&rec);
            if rec.len() != columns.len() {
                return Err(parse_err(path, line, format!("expected {} fields, got {}", columns.len(), rec.len())));
            }
            let row = rec
                .iter()
                .map(|c| c.parse::<f64>().map_err(|_| parse_err(path, line, format!("`{c}` is not a number"))))
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(Table { columns, rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ofdm::{build_frame, pilot_sequence, qpsk_payload, FrameConfig};
    use crate::synth::presets::{targets, Scenario};
    use crate::pathloss::presets::Forest;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn pathloss_rows_and_line_endings() {
        let d = tmp();
        let p = d.path().join("pl.csv");
        std::fs::write(&p, "dist_m,pl_db\r\n10,80.5\r\n20,84.25\r\n40,90\r\n").unwrap();
        let s = read_pathloss_csv(&p).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!((s[1].dist_m, s[1].pl_db), (20.0, 84.25));
        assert_eq!(s[0].elev_deg, None);

        std::fs::write(&p, "dist_m,pl_db,elev_deg,env,link\n100,95,30,larch,a2g\n50,88,,birch,\n").unwrap();
        let s = read_pathloss_csv(&p).unwrap();
        assert_eq!(s[0].elev_deg, Some(30.0));
        assert_eq!((s[0].env, s[0].link), (Environment::Larch, LinkType::A2G));
        assert_eq!((s[1].env, s[1].link, s[1].elev_deg), (Environment::Birch, LinkType::G2G, None));
    }

    #[test]
    fn pathloss_errors_cite_lines() {
        let d = tmp();
        let p = d.path().join("pl.csv");
        std::fs::write(&p, "dist_m,pl_db\n10,80\n0,70\n").unwrap();
        match read_pathloss_csv(&p) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("dist_m"));
            }
            other => panic!("{other:?}"),
        }
        std::fs::write(&p, "dist_m,pl_db\n10,abc\n").unwrap();
        assert!(matches!(read_pathloss_csv(&p), Err(Error::Parse { line: 2, .. })));
        std::fs::write(&p, "distance,pl\n10,80\n").unwrap();
        assert!(matches!(read_pathloss_csv(&p), Err(Error::Parse { line: 1, .. })));
        std::fs::write(&p, "dist_m,pl_db\n").unwrap();
        assert!(matches!(read_pathloss_csv(&p), Err(Error::Arity(_))));
        assert!(matches!(read_pathloss_csv(&d.path().join("missing.csv")), Err(Error::Io { .. })));
    }

    #[test]
    fn pathloss_round_trip_is_exact() {
        let d = tmp();
        let p = d.path().join("pl.csv");
        let mut a = PathLossSample::new(0.1 + 0.2, 1.0 / 3.0);
        a.elev_deg = Some(60.0);
        a.env = Environment::Birch;
        a.link = LinkType::A2G;
        let samples = vec![a, PathLossSample::new(123.456_789, 99.999_999_999)];
        write_pathloss_csv(&p, &samples).unwrap();
        assert_eq!(read_pathloss_csv(&p).unwrap(), samples);
    }

    #[test]
    fn hex_words_scale() {
        let s = parse_iq_hex(b"7FFF 0000\n0000 8000\n", 30.72e6, Path::new("x.hex")).unwrap();
        assert_eq!(s.samples[0], Complex64::new(32767.0 / 32768.0, 0.0));
        assert!((s.samples[0].re - 0.99997).abs() < 1e-5);
        assert_eq!(s.samples[1], Complex64::new(0.0, -1.0));
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn hex_errors_report_byte_offsets() {
        match parse_iq_hex(b"0001 0002\n0003\n", 1.0, Path::new("x.hex")) {
            Err(Error::HexParse { offset, .. }) => assert_eq!(offset, 10),
            other => panic!("{other:?}"),
        }
        match parse_iq_hex(b"0001 00G2\n", 1.0, Path::new("x.hex")) {
            Err(Error::HexParse { offset, message, .. }) => {
                assert_eq!(offset, 5);
                assert!(message.contains("00G2"));
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_iq_hex(b"12345 0000\n", 1.0, Path::new("x.hex")).is_err());
    }

    #[test]
    fn hex_round_trip_within_one_lsb() {
        let cfg = FrameConfig::default();
        let frame = build_frame(&cfg, &qpsk_payload(&cfg, 1), &pilot_sequence(&cfg, 1)).unwrap();
        // Scale so the frame fits the converter range.
        let peak = frame.samples.iter().map(|c| c.re.abs().max(c.im.abs())).fold(0.0, f64::max);
        let scaled = SampleStream::new(frame.samples.iter().map(|c| c * (0.9 / peak)).collect(), cfg.fs_hz, StreamOrigin::Tx);
        let d = tmp();
        let p = d.path().join("cap.hex");
        write_iq_hex(&p, &scaled).unwrap();
        let back = read_iq_hex(&p, cfg.fs_hz).unwrap();
        assert_eq!(back.len(), scaled.len());
        let worst = scaled
            .samples
            .iter()
            .zip(&back.samples)
            .map(|(a, b)| (a.re - b.re).abs().max((a.im - b.im).abs()))
            .fold(0.0, f64::max);
        assert!(worst <= 2f64.powi(-15), "{worst}");
    }

    #[test]
    fn sweep_round_trip_and_arity() {
        let d = tmp();
        let p = d.path().join("sweep.csv");
        let readings: Vec<SectorReading> =
            (0..12).map(|i| SectorReading { azimuth_deg: 30.0 * i as f64, rssi_dbm: -60.0 - i as f64 * 0.5 }).collect();
        let sweep = SectorSweep::new(readings).unwrap();
        write_sweep_csv(&p, &sweep).unwrap();
        assert_eq!(read_sweep_csv(&p).unwrap(), sweep);
        std::fs::write(&p, "azimuth_deg,rssi_dbm\n0,-50\n30,-51\n").unwrap();
        assert!(matches!(read_sweep_csv(&p), Err(Error::Arity(_))));
    }

    #[test]
    fn profile_round_trips() {
        let d = tmp();
        let prof = crate::synth::synth_forest_profile(&targets(Forest::Larch, Scenario::G2g), 4).unwrap();
        for name in ["p.csv", "p.json"] {
            let p = d.path().join(name);
            write_profile(&p, &prof).unwrap();
            // Exact up to the ns <-> s rescaling of delays.
            let back = read_profile(&p).unwrap().records();
            assert_eq!(back.len(), prof.records().len(), "{name}");
            for (a, b) in back.iter().zip(prof.records()) {
                assert_eq!((a.amp_re, a.amp_im, a.class), (b.amp_re, b.amp_im, b.class), "{name}");
                assert!((a.delay_ns - b.delay_ns).abs() <= 1e-12 * b.delay_ns.max(1.0), "{name}");
            }
        }
    }

    #[test]
    fn table_round_trip_and_atomic_overwrite() {
        let d = tmp();
        let p = d.path().join("sub").join("t.csv");
        let mut t = Table::new(&["x", "y"]);
        t.rows.push(vec![1.0, 0.1 + 0.2]);
        t.rows.push(vec![2.0, -1e-300]);
        t.write(&p).unwrap();
        t.rows.push(vec![3.0, 4.0]);
        t.write(&p).unwrap();
        assert_eq!(Table::read(&p).unwrap(), t);
        assert_eq!(t.column("y").unwrap()[1], -1e-300);
        let leftovers = std::fs::read_dir(p.parent().unwrap()).unwrap().count();
        assert_eq!(leftovers, 1);
    }
}
