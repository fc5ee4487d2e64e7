//! Counts files and regression CSVs.

use std::path::Path;

use zipbf_core::nalgebra::DMatrix;

use crate::CliError;

/// Parsed regression input, rows in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionInput {
    pub counts: Vec<i64>,
    pub design: DMatrix<f64>,
    pub offsets: Vec<f64>,
    /// Covariate names in column order, `(intercept)` first when prepended.
    pub columns: Vec<String>,
}

pub fn read_to_string(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

/// One nonnegative integer per line. Blank lines and lines starting with
/// `#` are skipped; the first data line may be the header `count`.
pub fn parse_counts(text: &str) -> Result<Vec<i64>, CliError> {
    let mut counts = Vec::new();
    let mut seen_data = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_data && line.eq_ignore_ascii_case("count") {
            seen_data = true;
            continue;
        }
        seen_data = true;
        let v: i64 = line
            .parse()
            .map_err(|_| CliError::Input(format!("line {}: expected a nonnegative integer, got '{line}'", i + 1)))?;
        if v < 0 {
            return Err(CliError::Input(format!("line {}: count {v} is negative", i + 1)));
        }
        counts.push(v);
    }
    if counts.is_empty() {
        return Err(CliError::Input("no counts found".into()));
    }
    Ok(counts)
}

/// CSV with header `count,offset,x1,…,xq`. The `offset` column is optional
/// (zeros when absent); every other column is a covariate. With
/// `intercept` a column of ones is prepended to the design.
pub fn parse_regression(text: &str, intercept: bool) -> Result<RegressionInput, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CliError::Input(format!("cannot read CSV header: {e}")))?
        .clone();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let count_col = find("count").ok_or_else(|| CliError::Input("CSV header has no 'count' column".into()))?;
    let offset_col = find("offset");
    let covariates: Vec<usize> = (0..headers.len()).filter(|&c| c != count_col && Some(c) != offset_col).collect();

    let mut columns: Vec<String> = Vec::new();
    if intercept {
        columns.push("(intercept)".into());
    }
    columns.extend(covariates.iter().map(|&c| headers[c].to_string()));
    let q = columns.len();
    if q == 0 {
        return Err(CliError::Input("no covariate columns; pass --intercept for an intercept-only model".into()));
    }

    let mut counts = Vec::new();
    let mut offsets = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Input(format!("malformed CSV: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |c: usize| record.get(c).unwrap_or("");
        let count: i64 = field(count_col)
            .parse()
            .map_err(|_| CliError::Input(format!("line {line}: count '{}' is not an integer", field(count_col))))?;
        if count < 0 {
            return Err(CliError::Input(format!("line {line}: count {count} is negative")));
        }
        let number = |c: usize| -> Result<f64, CliError> {
            let v: f64 = field(c)
                .parse()
                .map_err(|_| CliError::Input(format!("line {line}: column '{}' value '{}' is not a number", &headers[c], field(c))))?;
            if !v.is_finite() {
                return Err(CliError::Input(format!("line {line}: column '{}' is not finite", &headers[c])));
            }
            Ok(v)
        };
        counts.push(count);
        offsets.push(match offset_col {
            Some(c) => number(c)?,
            None => 0.0,
        });
        if intercept {
            values.push(1.0);
        }
        for &c in &covariates {
            values.push(number(c)?);
        }
    }
    if counts.is_empty() {
        return Err(CliError::Input("CSV has no data rows".into()));
    }
    let design = DMatrix::from_row_slice(counts.len(), q, &values);
    Ok(RegressionInput { counts, design, offsets, columns })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_with_header_and_comments() {
        let c = parse_counts("# uti\ncount\n0\n\n3\n 1 \n").unwrap();
        assert_eq!(c, vec![0, 3, 1]);
        assert!(matches!(parse_counts("1\n-2\n"), Err(CliError::Input(m)) if m.starts_with("line 2")));
        assert!(matches!(parse_counts("1\nx\n"), Err(CliError::Input(m)) if m.starts_with("line 2")));
        assert!(parse_counts("# nothing\n").is_err());
        // The header is only accepted before the data.
        assert!(parse_counts("1\ncount\n").is_err());
    }

    #[test]
    fn regression_columns() {
        let r = parse_regression("count,offset,w\n0,0.5,1.5\n2,-0.1,2\n", true).unwrap();
        assert_eq!(r.counts, vec![0, 2]);
        assert_eq!(r.offsets, vec![0.5, -0.1]);
        assert_eq!(r.design, DMatrix::from_row_slice(2, 2, &[1.0, 1.5, 1.0, 2.0]));
        assert_eq!(r.columns, vec!["(intercept)", "w"]);

        let r = parse_regression("x1,count\n1,3\n", false).unwrap();
        assert_eq!(r.offsets, vec![0.0]);
        assert_eq!(r.design, DMatrix::from_row_slice(1, 1, &[1.0]));
    }

    #[test]
    fn regression_errors() {
        assert!(parse_regression("count\n1\n", false).is_err());
        assert!(parse_regression("y,x\n1,2\n", true).is_err());
        let e = parse_regression("count,x\n1,2\n1,oops\n", false).unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        let e = parse_regression("count,x\n1,2\n-1,2\n", false).unwrap_err();
        assert!(e.to_string().contains("negative"), "{e}");
        assert!(parse_regression("count,x\n", false).is_err());
    }
}
