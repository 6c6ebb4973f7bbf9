//! The CSV dialect shared by every artifact: `# key: value` metadata lines,
//! one header row, comma-separated rows, LF endings, 15 significant digits.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::pulses::DiffractionOrder;
use crate::real::Real;
use crate::signals::{Abscissa, SignalCurve};
use crate::spectral::SpectralDensity;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub meta: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// 15 significant digits in scientific notation.
pub fn format_value(x: f64) -> String {
    format!("{x:.14e}")
}

impl CsvTable {
    pub fn new(header: Vec<String>) -> Self {
        Self {
            header,
            ..Self::default()
        }
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Csv(format!("no column `{name}` in {:?}", self.header)))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let k = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        for (k, v) in &self.meta {
            // keep metadata single-line
            let v = v.replace('\n', " ");
            writeln!(out, "# {k}: {v}")?;
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            if row.len() != self.header.len() {
                return Err(Error::Csv(format!(
                    "row has {} fields, header has {}",
                    row.len(),
                    self.header.len()
                )));
            }
            w.write_record(row.iter().map(|&x| format_value(x)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Csv(e.to_string()))
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write(std::io::BufWriter::new(file))
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let mut meta = Vec::new();
        let mut body = String::new();
        for line in BufReader::new(input).lines() {
            let line = line?;
            if let Some(rest) = line.strip_prefix('#') {
                if body.is_empty() {
                    let rest = rest.trim();
                    match rest.split_once(':') {
                        Some((k, v)) => meta.push((k.trim().to_string(), v.trim().to_string())),
                        None if !rest.is_empty() => meta.push((rest.to_string(), String::new())),
                        None => {}
                    }
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            body.push_str(&line);
            body.push('\n');
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| Error::Csv(format!("row {}: `{s}` is not a number", i + 1)))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(Self { meta, header, rows })
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;
        Self::read(file)
    }
}

const INTENSITY: &str = "intensity";

impl<T: Real> SignalCurve<T> {
    pub fn to_table(&self) -> CsvTable {
        CsvTable {
            meta: self.meta.clone(),
            header: vec![self.abscissa.column().to_string(), INTENSITY.to_string()],
            rows: self
                .samples
                .iter()
                .map(|&(x, y)| vec![x.to_f64_lossy(), y.to_f64_lossy()])
                .collect(),
        }
    }

    /// Reads a two-column curve; the order comes from the `order` metadata
    /// key unless given explicitly.
    pub fn from_table(table: &CsvTable, order: Option<DiffractionOrder>) -> Result<Self> {
        let abscissa = match table.header.first().map(String::as_str) {
            Some("t_ps") => Abscissa::Time,
            Some("t1_ps") => Abscissa::FirstPulse,
            other => return Err(Error::Csv(format!("unknown abscissa column {other:?}"))),
        };
        let y = table.column_index(INTENSITY)?;
        let order = match order {
            Some(o) => o,
            None => DiffractionOrder::parse(
                table
                    .meta_value("order")
                    .ok_or_else(|| Error::Csv("missing `order` metadata".into()))?,
            )?,
        };
        Ok(Self {
            order,
            abscissa,
            samples: table.rows.iter().map(|r| (T::lit(r[0]), T::lit(r[y]))).collect(),
            meta: table.meta.clone(),
        })
    }
}

/// Reads a measured spectrum with columns `omega_meV,I_meV`.
pub fn read_tabulated_spectrum(path: impl AsRef<Path>) -> Result<SpectralDensity<f64>> {
    let table = CsvTable::read_file(path)?;
    let w = table.column("omega_meV")?;
    let i = table.column("I_meV")?;
    SpectralDensity::tabulated(w.into_iter().zip(i).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn writes_the_dialect() {
        let mut t = CsvTable::new(vec!["t_ps".into(), "intensity".into()]);
        t.meta.push(("order".into(), "2k2-2k1+k0".into()));
        t.rows.push(vec![0.1, 0.25]);
        let s = t.to_string().unwrap();
        assert_eq!(
            s,
            "# order: 2k2-2k1+k0\nt_ps,intensity\n1.00000000000000e-1,2.50000000000000e-1\n"
        );
    }

    #[test]
    fn curve_round_trip() {
        let mut c = SignalCurve::<f64>::new(DiffractionOrder::four_wave(), Abscissa::FirstPulse);
        c.push_meta("order", "2k2-k0");
        c.push_meta("temperature_K", 10.0);
        c.samples = vec![(0.05, 1.234567890123456e-3), (0.1, 0.0)];
        let s = c.to_table().to_string().unwrap();
        let back = SignalCurve::<f64>::from_table(&CsvTable::read(s.as_bytes()).unwrap(), None).unwrap();
        assert_eq!(back.order, c.order);
        assert_eq!(back.abscissa, Abscissa::FirstPulse);
        assert_eq!(back.meta, c.meta);
        for (a, b) in back.samples.iter().zip(&c.samples) {
            assert!((a.1 - b.1).abs() <= 1e-14 * b.1.abs());
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(CsvTable::read("a,b\n1,x\n".as_bytes()).is_err());
        let t = CsvTable::read("a,b\n1,2\n".as_bytes()).unwrap();
        assert!(t.column("c").is_err());
        assert!(SignalCurve::<f64>::from_table(&t, None).is_err());
    }

    proptest! {
        #[test]
        fn fifteen_digits_survive(x in proptest::num::f64::NORMAL) {
            let back: f64 = format_value(x).parse().unwrap();
            prop_assert!((back - x).abs() <= 1e-14 * x.abs());
            prop_assert_eq!(format_value(back), format_value(x));
        }
    }
}
