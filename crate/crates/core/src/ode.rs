//! Dormand–Prince 8(5,3) adaptive integrator for complex vector ODEs.

use crate::error::{Error, Result};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dop853 {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub max_steps: usize,
    pub safe: f64,
    /// Bounds on the step-size ratio `h_new / h`.
    pub fac_min: f64,
    pub fac_max: f64,
}

impl Default for Dop853 {
    fn default() -> Self {
        Dop853::with_tol(1e-9)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evals: usize,
}

impl std::ops::AddAssign for OdeStats {
    fn add_assign(&mut self, o: Self) {
        self.accepted += o.accepted;
        self.rejected += o.rejected;
        self.evals += o.evals;
    }
}

impl Dop853 {
    pub fn with_tol(tol: f64) -> Self {
        Dop853 {
            rtol: tol,
            atol: tol,
            h_max: f64::INFINITY,
            max_steps: 50_000_000,
            safe: 0.9,
            fac_min: 0.333,
            fac_max: 6.0,
        }
    }

    /// Integrates `y' = f(t, y)` from `t0` to `t1` in place. `h0` seeds the
    /// first step; the last accepted step size is returned with the stats.
    pub fn integrate<F>(
        &self,
        f: F,
        t0: f64,
        t1: f64,
        y: &mut [C64],
        h0: Option<f64>,
    ) -> Result<(OdeStats, f64)>
    where
        F: FnMut(f64, &[C64], &mut [C64]),
    {
        self.integrate_observed(f, t0, t1, y, h0, |_, _| Ok(()))
    }

    /// As [`Self::integrate`], calling `observe(t, y)` after every accepted step.
    pub fn integrate_observed<F, O>(
        &self,
        mut f: F,
        t0: f64,
        t1: f64,
        y: &mut [C64],
        h0: Option<f64>,
        mut observe: O,
    ) -> Result<(OdeStats, f64)>
    where
        F: FnMut(f64, &[C64], &mut [C64]),
        O: FnMut(f64, &[C64]) -> Result<()>,
    {
        let n = y.len();
        let mut stats = OdeStats::default();
        if t1 <= t0 || n == 0 {
            return Ok((stats, h0.unwrap_or(0.0)));
        }
        let span = t1 - t0;
        let h_max = self.h_max.min(span);
        let z = C64::new(0.0, 0.0);
        let mut k = vec![vec![z; n]; 10];
        let mut ytmp = vec![z; n];
        let mut ynew = vec![z; n];
        let mut y12 = vec![z; n];

        let mut t = t0;
        f(t, y, &mut k[0]);
        stats.evals += 1;
        let mut h = match h0 {
            Some(h) if h > 0.0 => h.min(h_max),
            _ => {
                stats.evals += 1;
                self.initial_step(&mut f, t, y, &k[0].clone(), h_max, &mut ytmp, &mut k[1])
            }
        };
        let mut last_h;
        let expo1 = 1.0 / 8.0;
        let mut reject = false;

        loop {
            if stats.accepted + stats.rejected >= self.max_steps {
                return Err(Error::MaxSteps(self.max_steps));
            }
            let mut last = false;
            if t + 1.01 * h >= t1 {
                h = t1 - t;
                last = true;
            }
            if h.abs() <= 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepUnderflow { t, h });
            }

            // Stages 2..=10 stored in k[1..=9], stage 11 in ynew scratch.
            macro_rules! stage {
                ($dst:expr, $c:expr, [$(($j:expr, $a:expr)),*]) => {{
                    for i in 0..n {
                        let mut acc = z;
                        $( acc += k[$j][i] * $a; )*
                        ytmp[i] = y[i] + acc * h;
                    }
                    f(t + $c * h, &ytmp, &mut k[$dst]);
                }};
            }
            stage!(1, C2, [(0, A21)]);
            stage!(2, C3, [(0, A31), (1, A32)]);
            stage!(3, C4, [(0, A41), (2, A43)]);
            stage!(4, C5, [(0, A51), (2, A53), (3, A54)]);
            stage!(5, C6, [(0, A61), (3, A64), (4, A65)]);
            stage!(6, C7, [(0, A71), (3, A74), (4, A75), (5, A76)]);
            stage!(7, C8, [(0, A81), (3, A84), (4, A85), (5, A86), (6, A87)]);
            stage!(
                8,
                C9,
                [(0, A91), (3, A94), (4, A95), (5, A96), (6, A97), (7, A98)]
            );
            stage!(
                9,
                C10,
                [
                    (0, A101),
                    (3, A104),
                    (4, A105),
                    (5, A106),
                    (6, A107),
                    (7, A108),
                    (8, A109)
                ]
            );
            // k11 goes to k[1], which is no longer needed.
            stage!(
                1,
                C11,
                [
                    (0, A111),
                    (3, A114),
                    (4, A115),
                    (5, A116),
                    (6, A117),
                    (7, A118),
                    (8, A119),
                    (9, A1110)
                ]
            );
            for i in 0..n {
                let acc = k[0][i] * A121
                    + k[3][i] * A124
                    + k[4][i] * A125
                    + k[5][i] * A126
                    + k[6][i] * A127
                    + k[7][i] * A128
                    + k[8][i] * A129
                    + k[9][i] * A1210
                    + k[1][i] * A1211;
                y12[i] = y[i] + acc * h;
            }
            // k12 goes to k[2].
            f(t + h, &y12, &mut k[2]);
            stats.evals += 11;

            let mut err = 0.0;
            let mut err2 = 0.0;
            for i in 0..n {
                let incr = k[0][i] * B1
                    + k[5][i] * B6
                    + k[6][i] * B7
                    + k[7][i] * B8
                    + k[8][i] * B9
                    + k[9][i] * B10
                    + k[1][i] * B11
                    + k[2][i] * B12;
                ynew[i] = y[i] + incr * h;
                let sk = self.atol + self.rtol * y[i].norm().max(ynew[i].norm());
                let e2 = incr - k[0][i] * BHH1 - k[8][i] * BHH2 - k[2][i] * BHH3;
                err2 += (e2.norm() / sk).powi(2);
                let e1 = k[0][i] * ER1
                    + k[5][i] * ER6
                    + k[6][i] * ER7
                    + k[7][i] * ER8
                    + k[8][i] * ER9
                    + k[9][i] * ER10
                    + k[1][i] * ER11
                    + k[2][i] * ER12;
                err += (e1.norm() / sk).powi(2);
            }
            let mut deno = err + 0.01 * err2;
            if deno <= 0.0 {
                deno = 1.0;
            }
            let err = h.abs() * err * (1.0 / (deno * n as f64)).sqrt();
            let fac11 = err.powf(expo1);
            let fac = (1.0 / self.fac_max).max((1.0 / self.fac_min).min(fac11 / self.safe));
            let mut h_new = h / fac;

            if err <= 1.0 {
                stats.accepted += 1;
                y.copy_from_slice(&ynew);
                t = if last { t1 } else { t + h };
                last_h = h;
                f(t, y, &mut k[0]);
                stats.evals += 1;
                observe(t, y)?;
                if last {
                    return Ok((stats, last_h));
                }
                if reject {
                    h_new = h_new.min(h);
                }
                reject = false;
            } else {
                h_new = h / (1.0 / self.fac_min).min(fac11 / self.safe);
                reject = true;
                stats.rejected += 1;
            }
            h = h_new.min(h_max);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn initial_step<F>(
        &self,
        f: &mut F,
        t: f64,
        y: &[C64],
        f0: &[C64],
        h_max: f64,
        ytmp: &mut [C64],
        f1: &mut [C64],
    ) -> f64
    where
        F: FnMut(f64, &[C64], &mut [C64]),
    {
        let sk: Vec<f64> = y.iter().map(|v| self.atol + self.rtol * v.norm()).collect();
        let dnf: f64 = f0
            .iter()
            .zip(&sk)
            .map(|(v, s)| (v.norm() / s).powi(2))
            .sum();
        let dny: f64 = y.iter().zip(&sk).map(|(v, s)| (v.norm() / s).powi(2)).sum();
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
            1e-6
        } else {
            (dny / dnf).sqrt() * 0.01
        };
        h = h.min(h_max);
        for i in 0..y.len() {
            ytmp[i] = y[i] + f0[i] * h;
        }
        f(t + h, ytmp, f1);
        let der2 = f1
            .iter()
            .zip(f0)
            .zip(&sk)
            .map(|((a, b), s)| ((a - b).norm() / s).powi(2))
            .sum::<f64>()
            .sqrt()
            / h;
        let der12 = der2.max(dnf.sqrt());
        let h1 = if der12 <= 1e-15 {
            (h * 1e-3).max(1e-6)
        } else {
            (0.01 / der12).powf(1.0 / 8.0)
        };
        (100.0 * h).min(h1).min(h_max)
    }
}

const A21: f64 = 5.26001519587677318785587544488E-2;
const A31: f64 = 1.97250569845378994544595329183E-2;
const A32: f64 = 5.91751709536136983633785987549E-2;
const A41: f64 = 2.95875854768068491816892993775E-2;
const A43: f64 = 8.87627564304205475450678981324E-2;
const A51: f64 = 2.41365134159266685502369798665E-1;
const A53: f64 = -8.84549479328286085344864962717E-1;
const A54: f64 = 9.24834003261792003115737966543E-1;
const A61: f64 = 3.7037037037037037037037037037E-2;
const A64: f64 = 1.70828608729473871279604482173E-1;
const A65: f64 = 1.25467687566822425016691814123E-1;
const A71: f64 = 3.7109375E-2;
const A74: f64 = 1.70252211019544039314978060272E-1;
const A75: f64 = 6.02165389804559606850219397283E-2;
const A76: f64 = -1.7578125E-2;
const A81: f64 = 3.70920001185047927108779319836E-2;
const A84: f64 = 1.70383925712239993810214054705E-1;
const A85: f64 = 1.07262030446373284651809199168E-1;
const A86: f64 = -1.53194377486244017527936158236E-2;
const A87: f64 = 8.27378916381402288758473766002E-3;
const A91: f64 = 6.24110958716075717114429577812E-1;
const A94: f64 = -3.36089262944694129406857109825E0;
const A95: f64 = -8.68219346841726006818189891453E-1;
const A96: f64 = 2.75920996994467083049415600797E1;
const A97: f64 = 2.01540675504778934086186788979E1;
const A98: f64 = -4.34898841810699588477366255144E1;
const A101: f64 = 4.77662536438264365890433908527E-1;
const A104: f64 = -2.48811461997166764192642586468E0;
const A105: f64 = -5.90290826836842996371446475743E-1;
const A106: f64 = 2.12300514481811942347288949897E1;
const A107: f64 = 1.52792336328824235832596922938E1;
const A108: f64 = -3.32882109689848629194453265587E1;
const A109: f64 = -2.03312017085086261358222928593E-2;
const A111: f64 = -9.3714243008598732571704021658E-1;
const A114: f64 = 5.18637242884406370830023853209E0;
const A115: f64 = 1.09143734899672957818500254654E0;
const A116: f64 = -8.14978701074692612513997267357E0;
const A117: f64 = -1.85200656599969598641566180701E1;
const A118: f64 = 2.27394870993505042818970056734E1;
const A119: f64 = 2.49360555267965238987089396762E0;
const A1110: f64 = -3.0467644718982195003823669022E0;
const A121: f64 = 2.27331014751653820792359768449E0;
const A124: f64 = -1.05344954667372501984066689879E1;
const A125: f64 = -2.00087205822486249909675718444E0;
const A126: f64 = -1.79589318631187989172765950534E1;
const A127: f64 = 2.79488845294199600508499808837E1;
const A128: f64 = -2.85899827713502369474065508674E0;
const A129: f64 = -8.87285693353062954433549289258E0;
const A1210: f64 = 1.23605671757943030647266201528E1;
const A1211: f64 = 6.43392746015763530355970484046E-1;
const B1: f64 = 5.42937341165687622380535766363E-2;
const B6: f64 = 4.45031289275240888144113950566E0;
const B7: f64 = 1.89151789931450038304281599044E0;
const B8: f64 = -5.8012039600105847814672114227E0;
const B9: f64 = 3.1116436695781989440891606237E-1;
const B10: f64 = -1.52160949662516078556178806805E-1;
const B11: f64 = 2.01365400804030348374776537501E-1;
const B12: f64 = 4.47106157277725905176885569043E-2;
const BHH1: f64 = 0.244094488188976377952755905512E+00;
const BHH2: f64 = 0.733846688281611857341361741547E+00;
const BHH3: f64 = 0.220588235294117647058823529412E-01;
const C2: f64 = 0.526001519587677318785587544488E-01;
const C3: f64 = 0.789002279381515978178381316732E-01;
const C4: f64 = 0.118350341907227396726757197510E+00;
const C5: f64 = 0.281649658092772603273242802490E+00;
const C6: f64 = 0.333333333333333333333333333333E+00;
const C7: f64 = 0.25E+00;
const C8: f64 = 0.307692307692307692307692307692E+00;
const C9: f64 = 0.651282051282051282051282051282E+00;
const C10: f64 = 0.6E+00;
const C11: f64 = 0.857142857142857142857142857142E+00;
const ER1: f64 = 0.1312004499419488073250102996E-01;
const ER6: f64 = -0.1225156446376204440720569753E+01;
const ER7: f64 = -0.4957589496572501915214079952E+00;
const ER8: f64 = 0.1664377182454986536961530415E+01;
const ER9: f64 = -0.3503288487499736816886487290E+00;
const ER10: f64 = 0.3341791187130174790297318841E+00;
const ER11: f64 = 0.8192320648511571246570742613E-01;
const ER12: f64 = -0.2235530786388629525884427845E-01;
