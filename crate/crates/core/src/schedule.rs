//! Annealing paths `s(t)` and the energy-scale curves `A(s)`, `B(s)`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Forward,
    Reverse,
    ReversePaused,
    /// `s(t) = s_inv` for the whole duration `tau`.
    Hold,
}

/// How the inversion time is derived from `s_inv`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InversionRule {
    /// `t_inv = tau (1 - s_inv)`: the descent runs at unit rate `1/tau`.
    #[default]
    Proportional,
    /// `t_inv = tau / 2`.
    Midpoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealPath {
    pub tau: f64,
    pub s_inv: f64,
    pub t_pause: f64,
    pub kind: PathKind,
    #[serde(default)]
    pub inversion: InversionRule,
}

impl AnnealPath {
    pub fn forward(tau: f64) -> Result<Self> {
        Self::new(tau, 0.0, 0.0, PathKind::Forward)
    }

    pub fn reverse(tau: f64, s_inv: f64) -> Result<Self> {
        Self::new(tau, s_inv, 0.0, PathKind::Reverse)
    }

    /// Reverse anneal with a pause of `t_pause` at the inversion point. A zero
    /// pause gives a plain reverse path.
    pub fn reverse_paused(tau: f64, s_inv: f64, t_pause: f64) -> Result<Self> {
        if t_pause == 0.0 {
            return Self::reverse(tau, s_inv);
        }
        Self::new(tau, s_inv, t_pause, PathKind::ReversePaused)
    }

    pub fn hold(duration: f64, s: f64) -> Result<Self> {
        Self::new(duration, s, 0.0, PathKind::Hold)
    }

    pub fn new(tau: f64, s_inv: f64, t_pause: f64, kind: PathKind) -> Result<Self> {
        let path = AnnealPath {
            tau,
            s_inv,
            t_pause,
            kind,
            inversion: InversionRule::Proportional,
        };
        path.validate()?;
        Ok(path)
    }

    pub fn with_inversion(mut self, rule: InversionRule) -> Self {
        self.inversion = rule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::Schedule(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if !(self.t_pause.is_finite() && self.t_pause >= 0.0) {
            return Err(Error::Schedule(format!(
                "t_pause must be >= 0, got {}",
                self.t_pause
            )));
        }
        match self.kind {
            PathKind::Forward => {}
            PathKind::Hold => {
                if !(0.0..=1.0).contains(&self.s_inv) {
                    return Err(Error::Schedule(format!(
                        "hold value {} outside [0, 1]",
                        self.s_inv
                    )));
                }
            }
            PathKind::Reverse | PathKind::ReversePaused => {
                if !(self.s_inv > 0.0 && self.s_inv < 1.0) {
                    return Err(Error::Schedule(format!(
                        "s_inv must lie strictly inside (0, 1), got {}",
                        self.s_inv
                    )));
                }
            }
        }
        if self.kind != PathKind::ReversePaused && self.t_pause != 0.0 {
            return Err(Error::Schedule(format!(
                "{:?} path cannot carry a pause",
                self.kind
            )));
        }
        Ok(())
    }

    /// Total duration including the pause.
    pub fn duration(&self) -> f64 {
        self.tau + self.t_pause
    }

    /// Time at which the descent reaches `s_inv`.
    pub fn t_inv(&self) -> f64 {
        match self.kind {
            PathKind::Forward | PathKind::Hold => 0.0,
            PathKind::Reverse | PathKind::ReversePaused => match self.inversion {
                InversionRule::Proportional => self.tau * (1.0 - self.s_inv),
                InversionRule::Midpoint => 0.5 * self.tau,
            },
        }
    }

    /// Start and end times of the linear pieces of `s(t)`.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.kind {
            PathKind::Forward | PathKind::Hold => vec![0.0, self.tau],
            PathKind::Reverse => vec![0.0, self.t_inv(), self.tau],
            PathKind::ReversePaused => {
                let ti = self.t_inv();
                vec![0.0, ti, ti + self.t_pause, self.duration()]
            }
        }
    }

    /// Consecutive `(start, end)` pairs of [`Self::breakpoints`], skipping empty pieces.
    pub fn segments(&self) -> Vec<(f64, f64)> {
        let b = self.breakpoints();
        b.windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| (w[0], w[1]))
            .collect()
    }

    pub fn s_of_t(&self, t: f64) -> Result<f64> {
        let end = self.duration();
        let slack = 1e-9 * end.max(1.0);
        if !(t >= -slack && t <= end + slack) {
            return Err(Error::TimeOutOfDomain { t, end });
        }
        Ok(self.s_at(t.clamp(0.0, end)))
    }

    /// Unchecked evaluation; `t` is clamped into the domain.
    pub fn s_at(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.duration());
        match self.kind {
            PathKind::Forward => t / self.tau,
            PathKind::Hold => self.s_inv,
            PathKind::Reverse | PathKind::ReversePaused => {
                let ti = self.t_inv();
                let up = self.tau - ti;
                let si = self.s_inv;
                if t <= ti {
                    1.0 - (1.0 - si) * t / ti
                } else if t <= ti + self.t_pause {
                    si
                } else {
                    let u = t - ti - self.t_pause;
                    let s = si + (1.0 - si) * u / up;
                    s.min(1.0)
                }
            }
        }
    }

    /// Upper bound on `|ds/dt|`.
    pub fn max_rate(&self) -> f64 {
        match self.kind {
            PathKind::Forward => 1.0 / self.tau,
            PathKind::Hold => 0.0,
            PathKind::Reverse | PathKind::ReversePaused => {
                let ti = self.t_inv();
                let d = 1.0 - self.s_inv;
                (d / ti).max(d / (self.tau - ti))
            }
        }
    }
}

/// `A(s)` and `B(s)` in GHz.
#[derive(Clone, Debug, PartialEq)]
pub enum ScheduleCurves {
    Linear { a0: f64, b0: f64 },
    Tabulated(Table),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    s: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    da: Vec<f64>,
    db: Vec<f64>,
}

impl ScheduleCurves {
    /// The builtin `linear` schedule: `A = 10 (1 - s)`, `B = 10 s` GHz.
    pub fn linear() -> Self {
        ScheduleCurves::Linear { a0: 10.0, b0: 10.0 }
    }

    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "linear" => Ok(Self::linear()),
            other => Err(Error::Schedule(format!(
                "unknown builtin schedule '{other}'"
            ))),
        }
    }

    /// Loads a CSV file with header `s,A_GHz,B_GHz`.
    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::from_csv_reader(file)
    }

    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        let expected = ["s", "A_GHz", "B_GHz"];
        if header.len() != 3 || header.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(Error::Schedule(format!(
                "expected header 's,A_GHz,B_GHz', found '{}'",
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let (mut s, mut a, mut b) = (Vec::new(), Vec::new(), Vec::new());
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|v| v.parse::<f64>().ok())
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        Error::Schedule(format!(
                            "row {}: bad value in column {}",
                            i + 1,
                            expected[k]
                        ))
                    })
            };
            s.push(field(0)?);
            a.push(field(1)?);
            b.push(field(2)?);
        }
        Self::tabulated(s, a, b)
    }

    /// Builds a tabulated schedule, validating grid and shape requirements.
    pub fn tabulated(s: Vec<f64>, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if s.len() < 2 || s.len() != a.len() || s.len() != b.len() {
            return Err(Error::Schedule(
                "table needs at least two rows of (s, A, B)".into(),
            ));
        }
        if s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Schedule("s grid is not strictly increasing".into()));
        }
        if s[0].abs() > 1e-12 || (s[s.len() - 1] - 1.0).abs() > 1e-12 {
            return Err(Error::Schedule(format!(
                "s grid must cover [0, 1], got [{}, {}]",
                s[0],
                s[s.len() - 1]
            )));
        }
        if a.iter().chain(&b).any(|&v| v < 0.0) {
            return Err(Error::Schedule("A and B must be non-negative".into()));
        }
        if a.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Schedule("A(s) must be non-increasing".into()));
        }
        if b.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Schedule("B(s) must be non-decreasing".into()));
        }
        let last = s.len() - 1;
        check_dominance(a[0], b[0], "A(0)/B(0)")?;
        check_dominance(b[last], a[last], "B(1)/A(1)")?;
        let da = pchip_slopes(&s, &a);
        let db = pchip_slopes(&s, &b);
        Ok(ScheduleCurves::Tabulated(Table { s, a, b, da, db }))
    }

    /// `(A(s), B(s))` in GHz.
    pub fn eval(&self, s: f64) -> (f64, f64) {
        let s = s.clamp(0.0, 1.0);
        match self {
            ScheduleCurves::Linear { a0, b0 } => (a0 * (1.0 - s), b0 * s),
            ScheduleCurves::Tabulated(t) => {
                let i = match t.s.partition_point(|&x| x <= s) {
                    0 => 0,
                    k => (k - 1).min(t.s.len() - 2),
                };
                (
                    hermite(&t.s, &t.a, &t.da, i, s),
                    hermite(&t.s, &t.b, &t.db, i, s),
                )
            }
        }
    }

    /// A short canonical description used for hashing and manifests.
    pub fn canonical_text(&self) -> String {
        match self {
            ScheduleCurves::Linear { a0, b0 } => format!("linear a0={a0:?} b0={b0:?}\n"),
            ScheduleCurves::Tabulated(t) => {
                let mut out = String::from("s,A_GHz,B_GHz\n");
                for i in 0..t.s.len() {
                    out.push_str(&format!("{:?},{:?},{:?}\n", t.s[i], t.a[i], t.b[i]));
                }
                out
            }
        }
    }
}

fn check_dominance(big: f64, small: f64, what: &str) -> Result<()> {
    if big > 10.0 * small {
        Ok(())
    } else {
        Err(Error::Schedule(format!(
            "{what} must exceed 10 (got {big} vs {small})"
        )))
    }
}

fn hermite(x: &[f64], y: &[f64], d: &[f64], i: usize, t: f64) -> f64 {
    let h = x[i + 1] - x[i];
    let u = (t - x[i]) / h;
    let u2 = u * u;
    let u3 = u2 * u;
    let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
    let h10 = u3 - 2.0 * u2 + u;
    let h01 = -2.0 * u3 + 3.0 * u2;
    let h11 = u3 - u2;
    h00 * y[i] + h10 * h * d[i] + h01 * y[i + 1] + h11 * h * d[i + 1]
}

/// Fritsch–Carlson shape-preserving derivative estimates (the PCHIP variant).
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let del: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    if n == 2 {
        return vec![del[0], del[0]];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        if del[k - 1] * del[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
        }
    }
    d[0] = end_slope(h[0], h[1], del[0], del[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
    d
}

fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inversion_point_from_figure() {
        let p = AnnealPath::reverse(500.0, 0.6).unwrap();
        assert!((p.t_inv() - 200.0).abs() < 1e-12);
        assert!((p.s_of_t(200.0).unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(p.s_of_t(0.0).unwrap(), 1.0);
        assert!((p.s_of_t(500.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ascending_branch_matches_closed_form() {
        let (tau, si) = (137.0, 0.37);
        let p = AnnealPath::reverse(tau, si).unwrap();
        for k in 0..=50 {
            let t = p.t_inv() + (tau - p.t_inv()) * k as f64 / 50.0;
            let closed = (1.0 - si) / (tau * si) * t + (2.0 * si - 1.0) / si;
            assert!((p.s_at(t) - closed).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn pause_holds() {
        let p = AnnealPath::reverse_paused(100.0, 0.3, 100.0).unwrap();
        for k in 0..=100 {
            let t = 70.0 + k as f64;
            assert!((p.s_at(t) - 0.3).abs() < 1e-12);
        }
        assert!((p.s_at(200.0) - 1.0).abs() < 1e-15);
        assert_eq!(p.duration(), 200.0);
    }

    #[test]
    fn midpoint_rule() {
        let p = AnnealPath::reverse(100.0, 0.2)
            .unwrap()
            .with_inversion(InversionRule::Midpoint);
        assert!((p.s_at(50.0) - 0.2).abs() < 1e-12);
        assert!((p.s_at(100.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_paths() {
        assert!(AnnealPath::reverse(100.0, 0.0).is_err());
        assert!(AnnealPath::reverse(100.0, 1.0).is_err());
        assert!(AnnealPath::reverse(-1.0, 0.5).is_err());
        let p = AnnealPath::reverse(10.0, 0.5).unwrap();
        assert!(p.s_of_t(10.5).is_err());
        assert!(p.s_of_t(-0.5).is_err());
    }

    #[test]
    fn linear_builtin() {
        let c = ScheduleCurves::builtin("linear").unwrap();
        assert_eq!(c.eval(0.0), (10.0, 0.0));
        assert_eq!(c.eval(0.5), (5.0, 5.0));
        assert!(ScheduleCurves::builtin("dw-like").is_err());
    }

    #[test]
    fn table_reproduces_linear_data() {
        let s: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
        let a: Vec<f64> = s.iter().map(|x| 10.0 * (1.0 - x)).collect();
        let b: Vec<f64> = s.iter().map(|x| 10.0 * x).collect();
        let c = ScheduleCurves::tabulated(s, a, b).unwrap();
        for k in 0..=97 {
            let x = k as f64 / 97.0;
            let (a, b) = c.eval(x);
            assert!((a - 10.0 * (1.0 - x)).abs() < 1e-12);
            assert!((b - 10.0 * x).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_validation() {
        let good = "s,A_GHz,B_GHz\n0,10,0\n0.5,2,3\n1,0,12\n";
        let c = ScheduleCurves::from_csv_reader(good.as_bytes()).unwrap();
        let (a, b) = c.eval(1.0);
        assert!(b > 10.0 * a);
        let bad_header = "s,A,B\n0,10,0\n1,0,10\n";
        assert!(ScheduleCurves::from_csv_reader(bad_header.as_bytes()).is_err());
        let non_monotone_grid = "s,A_GHz,B_GHz\n0,10,0\n0.6,5,5\n0.5,4,6\n1,0,10\n";
        assert!(ScheduleCurves::from_csv_reader(non_monotone_grid.as_bytes()).is_err());
        let rising_a = "s,A_GHz,B_GHz\n0,10,0\n0.5,11,5\n1,0,10\n";
        assert!(ScheduleCurves::from_csv_reader(rising_a.as_bytes()).is_err());
        let short = "s,A_GHz,B_GHz\n0,10,0\n0.9,0,10\n";
        assert!(ScheduleCurves::from_csv_reader(short.as_bytes()).is_err());
        let weak_end = "s,A_GHz,B_GHz\n0,10,0\n1,2,10\n";
        assert!(ScheduleCurves::from_csv_reader(weak_end.as_bytes()).is_err());
    }

    #[test]
    fn interpolation_stays_monotone() {
        let s = vec![0.0, 0.1, 0.2, 0.6, 1.0];
        let a = vec![10.0, 9.9, 3.0, 2.9, 0.0];
        let b = vec![0.0, 0.01, 0.02, 8.0, 12.0];
        let c = ScheduleCurves::tabulated(s, a, b).unwrap();
        let mut prev = c.eval(0.0);
        for k in 1..=2000 {
            let cur = c.eval(k as f64 / 2000.0);
            assert!(cur.0 <= prev.0 + 1e-12 && cur.1 >= prev.1 - 1e-12);
            prev = cur;
        }
    }
}
