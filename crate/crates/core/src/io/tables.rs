//! CSV outputs with fixed headers.

use std::fs::File;
use std::path::Path;

use num_complex::Complex64;

use crate::backsub::EvalMetrics;
use crate::error::Result;

pub const BENCH_HEADER: [&str; 6] = ["algo", "mode", "n", "m", "step", "seconds"];
pub const METRICS_HEADER: [&str; 5] = ["frame", "recall", "precision", "f_measure", "psnr"];
pub const SIGMA_HEADER: [&str; 3] = ["step", "index", "sigma"];
pub const EIGEN_HEADER: [&str; 5] = ["step", "index", "re", "im", "abs"];

pub struct Table {
    inner: csv::Writer<File>,
}

impl Table {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let mut inner = csv::Writer::from_path(path)?;
        inner.write_record(header)?;
        Ok(Self { inner })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(fields)?;
        Ok(())
    }

    pub fn metrics(&mut self, frame: u64, m: &EvalMetrics) -> Result<()> {
        self.row([
            frame.to_string(),
            m.recall.to_string(),
            m.precision.to_string(),
            m.f_measure.to_string(),
            m.psnr.to_string(),
        ])
    }

    pub fn sigma(&mut self, step: u64, sigma: &[f64]) -> Result<()> {
        for (i, s) in sigma.iter().enumerate() {
            self.row([step.to_string(), i.to_string(), s.to_string()])?;
        }
        Ok(())
    }

    pub fn eigenvalues(&mut self, step: u64, lambda: &[Complex64]) -> Result<()> {
        for (i, l) in lambda.iter().enumerate() {
            self.row([
                step.to_string(),
                i.to_string(),
                l.re.to_string(),
                l.im.to_string(),
                l.norm().to_string(),
            ])?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let mut t = Table::create(&path, &SIGMA_HEADER).unwrap();
        t.sigma(3, &[2.0, 0.5]).unwrap();
        t.finish().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "step,index,sigma\n3,0,2\n3,1,0.5\n");
    }

    #[test]
    fn bench_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.csv");
        let mut t = Table::create(&path, &BENCH_HEADER).unwrap();
        t.row(["svd", "streaming", "100", "20", "0", "0.001"]).unwrap();
        t.finish().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("algo,mode,n,m,step,seconds\n"));
    }
}
