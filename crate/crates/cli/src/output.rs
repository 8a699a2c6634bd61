use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::error::Result;

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// CSV sink. `incremental` flushes after every row.
pub struct CsvOut {
    w: Box<dyn Write>,
    incremental: bool,
    line: String,
}

impl CsvOut {
    /// `-` or no path writes to stdout.
    pub fn open(path: Option<&Path>, incremental: bool) -> Result<Self> {
        let w: Box<dyn Write> = match path {
            Some(p) if p != Path::new("-") => Box::new(BufWriter::new(File::create(p)?)),
            _ => Box::new(BufWriter::new(io::stdout().lock())),
        };
        Ok(CsvOut {
            w,
            incremental,
            line: String::new(),
        })
    }

    pub fn header(&mut self, cols: &[&str]) -> Result<()> {
        writeln!(self.w, "{}", cols.join(","))?;
        Ok(())
    }

    /// Writes one row of formatted fields.
    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.line.clear();
        for (i, f) in fields.into_iter().enumerate() {
            if i > 0 {
                self.line.push(',');
            }
            self.line.push_str(f.as_ref());
        }
        self.line.push('\n');
        self.w.write_all(self.line.as_bytes())?;
        if self.incremental {
            self.w.flush()?;
        }
        Ok(())
    }

    pub fn floats(&mut self, values: &[f64]) -> Result<()> {
        self.row(values.iter().map(|v| fmt_f64(*v)))
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}
