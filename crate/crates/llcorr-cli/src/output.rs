//! Fixed-format CSV: 17 significant digits, header row, '.' decimal separator.

use std::fs;
use std::path::Path;

use llcorr::thermo::Coupling;

use crate::error::Result;

pub fn num(x: f64) -> String {
    format!("{:.16e}", x)
}

pub fn coupling(c: Coupling) -> String {
    match c {
        Coupling::Finite(v) => num(v),
        Coupling::Infinite => "inf".to_string(),
    }
}

pub fn csv_string(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, csv_string(header, rows)?)?;
    Ok(())
}

/// Header and rows of a CSV file, for reading results back.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| Ok(rec?.iter().map(str::to_string).collect()))
        .collect::<Result<Vec<Vec<String>>>>()?;
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-17, 6.02214076e23, 5e-324] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(num(0.25), "2.5000000000000000e-1");
        assert_eq!(coupling(Coupling::Infinite), "inf");
    }

    #[test]
    fn selections_are_quoted() {
        let s = csv_string(&["selection", "x"], &[vec!["+R1,+R2;-R1,-R2".into(), num(1.0)]]).unwrap();
        assert_eq!(s, "selection,x\n\"+R1,+R2;-R1,-R2\",1.0000000000000000e0\n");
    }
}
