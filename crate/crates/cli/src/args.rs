//! Value types for grid and size flags.

use std::fmt;
use std::str::FromStr;

/// Integer grid: `1,2,4` or the geometric range `1:128:2`.
#[derive(Debug, Clone, PartialEq)]
pub struct KGrid(pub Vec<u32>);

/// Fraction grid: `0.01,0.1,1` or the geometric range `0.001:1:10`.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionGrid(pub Vec<f64>);

/// Byte count such as `4096`, `64MiB` or `1.5GiB`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ByteSize(pub u64);

#[derive(Debug)]
pub struct ArgError(String);

impl fmt::Display for ArgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ArgError {}

fn geometric(start: f64, stop: f64, factor: f64) -> Result<Vec<f64>, ArgError> {
    if !(start > 0.0 && stop >= start && factor > 1.0) {
        return Err(ArgError(format!(
            "range needs 0 < start <= stop and factor > 1, got {start}:{stop}:{factor}"
        )));
    }
    let mut out = Vec::new();
    let mut v = start;
    while v <= stop * (1.0 + 1e-9) {
        out.push(v);
        v *= factor;
        if out.len() > 10_000 {
            return Err(ArgError("range has too many points".into()));
        }
    }
    // Land exactly on the stop value when the last step rounds near it.
    if let Some(last) = out.last_mut() {
        if (*last - stop).abs() <= 1e-9 * stop {
            *last = stop;
        }
    }
    Ok(out)
}

fn split_grid(s: &str) -> Result<Vec<f64>, ArgError> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let num = |p: &str| {
        p.parse::<f64>()
            .map_err(|_| ArgError(format!("'{p}' is not a number")))
    };
    match parts.as_slice() {
        [start, stop, factor] => geometric(num(start)?, num(stop)?, num(factor)?),
        [_] => s
            .split(',')
            .map(|p| num(p.trim()))
            .collect::<Result<Vec<_>, _>>(),
        _ => Err(ArgError(format!("expected a comma list or start:stop:factor, got '{s}'"))),
    }
}

impl FromStr for KGrid {
    type Err = ArgError;

    fn from_str(s: &str) -> Result<Self, ArgError> {
        let values = split_grid(s)?;
        let ks = values
            .iter()
            .map(|&v| {
                let k = v.round();
                if k < 1.0 || k > f64::from(u32::MAX) || (k - v).abs() > 1e-9 {
                    Err(ArgError(format!("k must be a positive integer, got {v}")))
                } else {
                    Ok(k as u32)
                }
            })
            .collect::<Result<Vec<u32>, _>>()?;
        if ks.is_empty() {
            return Err(ArgError("empty grid".into()));
        }
        Ok(KGrid(ks))
    }
}

impl FromStr for FractionGrid {
    type Err = ArgError;

    fn from_str(s: &str) -> Result<Self, ArgError> {
        let values = split_grid(s)?;
        if values.is_empty() {
            return Err(ArgError("empty grid".into()));
        }
        if let Some(bad) = values.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
            return Err(ArgError(format!("fractions must lie in (0, 1], got {bad}")));
        }
        Ok(FractionGrid(values))
    }
}

impl FromStr for ByteSize {
    type Err = ArgError;

    fn from_str(s: &str) -> Result<Self, ArgError> {
        parse_size::parse_size(s)
            .map(ByteSize)
            .map_err(|e| ArgError(format!("bad size '{s}': {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_grids() {
        assert_eq!("1,2,4".parse::<KGrid>().unwrap().0, vec![1, 2, 4]);
        assert_eq!(
            "1:128:2".parse::<KGrid>().unwrap().0,
            vec![1, 2, 4, 8, 16, 32, 64, 128]
        );
        assert!("0,1".parse::<KGrid>().is_err());
        assert!("1.5".parse::<KGrid>().is_err());
        assert!("1:2".parse::<KGrid>().is_err());
    }

    #[test]
    fn fraction_grids() {
        let g = "0.001:1:10".parse::<FractionGrid>().unwrap().0;
        assert_eq!(g.len(), 4);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert!("0.5,1.5".parse::<FractionGrid>().is_err());
    }

    #[test]
    fn sizes() {
        assert_eq!("256MiB".parse::<ByteSize>().unwrap().0, 256 << 20);
        assert_eq!("4096".parse::<ByteSize>().unwrap().0, 4096);
        assert_eq!("1 GiB".parse::<ByteSize>().unwrap().0, 1 << 30);
        assert!("lots".parse::<ByteSize>().is_err());
    }
}
