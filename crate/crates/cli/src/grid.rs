//! Sweep axes: `START:STOP:STEP` ranges (stop included when within 1e-12)
//! or comma-separated lists.

const STOP_TOL: f64 = 1e-12;

pub fn parse_axis(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|_| format!("`{t}` is not a number"));
    let values = match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !(step > 0.0) || !start.is_finite() || !stop.is_finite() {
                return Err(format!("range `{s}` needs finite bounds and a positive step"));
            }
            if stop < start {
                return Err(format!("range `{s}` has stop below start"));
            }
            let mut out = Vec::new();
            let mut i = 0usize;
            loop {
                let x = start + i as f64 * step;
                if x > stop + STOP_TOL {
                    break;
                }
                out.push(if (x - stop).abs() <= STOP_TOL { stop } else { x });
                i += 1;
            }
            out
        }
        [list] => list.split(',').map(|t| num(t.trim())).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(format!("`{s}` is neither START:STOP:STEP nor a comma list")),
    };
    if values.is_empty() {
        return Err(format!("axis `{s}` is empty"));
    }
    Ok(values)
}

pub fn parse_int_axis(s: &str) -> Result<Vec<usize>, String> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("`{t}` is not a non-negative integer"));
    let values = match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if step == 0 || stop < start {
                return Err(format!("range `{s}` needs a positive step and stop >= start"));
            }
            (start..=stop).step_by(step).collect()
        }
        [list] => list.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(format!("`{s}` is neither START:STOP:STEP nor a comma list")),
    };
    if values.is_empty() {
        return Err(format!("axis `{s}` is empty"));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_include_the_stop() {
        let q = parse_axis("0:1:0.1").unwrap();
        assert_eq!(q.len(), 11);
        assert_eq!(q[10], 1.0);
        assert_eq!(parse_axis("0.25:6:0.25").unwrap().len(), 24);
        assert_eq!(parse_axis("0.5:0.999:0.01").unwrap().len(), 50);
        assert_eq!(parse_axis("0:1:0.02").unwrap().len(), 51);
    }

    #[test]
    fn lists_and_errors() {
        assert_eq!(parse_axis("0.5, 0.9,1").unwrap(), vec![0.5, 0.9, 1.0]);
        assert_eq!(parse_axis("-1:1:1").unwrap(), vec![-1.0, 0.0, 1.0]);
        assert!(parse_axis("1:0:0.1").is_err());
        assert!(parse_axis("0:1:0").is_err());
        assert!(parse_axis("a,b").is_err());
        assert_eq!(parse_int_axis("32:128:32").unwrap(), vec![32, 64, 96, 128]);
        assert_eq!(parse_int_axis("1,2,4").unwrap(), vec![1, 2, 4]);
        assert!(parse_int_axis("-2").is_err());
    }
}
