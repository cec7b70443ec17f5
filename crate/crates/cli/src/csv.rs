//! Minimal CSV writer for numeric tables: comma separated, LF line endings,
//! floats with 17 significant digits.

pub struct Csv {
    out: String,
    width: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut out = header.join(",");
        out.push('\n');
        Csv {
            out,
            width: header.len(),
        }
    }

    pub fn row<const N: usize>(&mut self, cells: [String; N]) {
        debug_assert_eq!(N, self.width, "row width must match the header");
        self.out.push_str(&cells.join(","));
        self.out.push('\n');
    }

    pub fn finish(self) -> String {
        self.out
    }
}

/// `{:.16e}` for finite values; `inf`, `-inf` and `nan` otherwise.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

/// Empty cell for missing values.
pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}
