use std::fmt;
use std::str::FromStr;

/// Values for one swept parameter: `min:max:count`, a comma list, or a scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub values: Vec<f64>,
    spec: String,
}

impl Grid {
    pub fn scalar(v: f64) -> Self {
        Grid {
            values: vec![v],
            spec: v.to_string(),
        }
    }

    pub fn with_spec(values: Vec<f64>, spec: String) -> Self {
        Grid { values, spec }
    }

    pub fn single(&self) -> Option<f64> {
        match self.values.as_slice() {
            [v] => Some(*v),
            _ => None,
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.spec)
    }
}

fn number(s: &str) -> Result<f64, String> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| format!("`{s}` is not a number"))
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let values = if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            let [a, b, n] = parts.as_slice() else {
                return Err(format!("`{s}`: expected min:max:count"));
            };
            let (a, b) = (number(a)?, number(b)?);
            let n: usize = n
                .trim()
                .parse()
                .map_err(|_| format!("`{n}` is not a point count"))?;
            if !(a.is_finite() && b.is_finite()) {
                return Err(format!("`{s}`: range ends must be finite"));
            }
            match n {
                0 => return Err(format!("`{s}`: count must be at least 1")),
                1 => vec![a],
                // endpoints exactly, interior points by interpolation
                _ => (0..n)
                    .map(|k| {
                        if k + 1 == n {
                            b
                        } else {
                            a + (b - a) * k as f64 / (n - 1) as f64
                        }
                    })
                    .collect(),
            }
        } else {
            s.split(',').map(number).collect::<Result<Vec<_>, _>>()?
        };
        if values.iter().any(|v| v.is_nan()) {
            return Err(format!("`{s}` contains NaN"));
        }
        Ok(Grid {
            values,
            spec: s.to_string(),
        })
    }
}
