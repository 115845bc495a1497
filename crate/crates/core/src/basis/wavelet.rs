//! Daubechies scaling functions by dyadic refinement and their periodized
//! translates on `[0, 1]`.

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

const D1: [f64; 2] = [
    7.071067811865475244e-1,
    7.071067811865475244e-1,
];
const D2: [f64; 4] = [
    4.8296291314453414337e-1,
    8.3651630373780790558e-1,
    2.2414386804201338103e-1,
    -1.2940952255126038117e-1,
];
const D3: [f64; 6] = [
    3.32670552950082616e-1,
    8.0689150931109257649e-1,
    4.598775021184915701e-1,
    -1.350110200102545887e-1,
    -8.5441273882026661693e-2,
    3.5226291885709536603e-2,
];
const D4: [f64; 8] = [
    2.3037781330889650086e-1,
    7.1484657055291564709e-1,
    6.3088076792985890788e-1,
    -2.7983769416859854211e-2,
    -1.8703481171909308408e-1,
    3.0841381835560763627e-2,
    3.2883011666885199735e-2,
    -1.0597401785069032105e-2,
];
const D5: [f64; 10] = [
    1.6010239797419291448e-1,
    6.0382926979718967054e-1,
    7.2430852843777292773e-1,
    1.3842814590132073151e-1,
    -2.4229488706638203186e-1,
    -3.2244869584638374648e-2,
    7.7571493840045713523e-2,
    -6.2414902127982742742e-3,
    -1.2580751999081999469e-2,
    3.335725285473771278e-3,
];
const D6: [f64; 12] = [
    1.1154074335010946362e-1,
    4.9462389039845308568e-1,
    7.5113390802109535068e-1,
    3.1525035170919762909e-1,
    -2.2626469396543982008e-1,
    -1.2976686756726193556e-1,
    9.7501605587323049102e-2,
    2.7522865530305728626e-2,
    -3.1582039317486029565e-2,
    5.5384220116149613925e-4,
    4.7772575109455106396e-3,
    -1.0773010853084795649e-3,
];
const D7: [f64; 14] = [
    7.785205408500917902e-2,
    3.9653931948191730654e-1,
    7.2913209084623511992e-1,
    4.6978228740519312247e-1,
    -1.4390600392856497541e-1,
    -2.2403618499387498264e-1,
    7.1309219266830264751e-2,
    8.0612609151083071913e-2,
    -3.802993693501441358e-2,
    -1.6574541630666880654e-2,
    1.2550998556099840613e-2,
    4.2957797292136652113e-4,
    -1.8016407040474909153e-3,
    3.5371379997452024845e-4,
];
const D8: [f64; 16] = [
    5.4415842243104009955e-2,
    3.1287159091429997066e-1,
    6.7563073629728980681e-1,
    5.8535468365420671277e-1,
    -1.5829105256349305667e-2,
    -2.8401554296154692652e-1,
    4.7248457391328277036e-4,
    1.2874742662047845886e-1,
    -1.736930100180754617e-2,
    -4.4088253930794751507e-2,
    1.3981027917398281649e-2,
    8.7460940474057767164e-3,
    -4.8703529934515743104e-3,
    -3.917403733769470463e-4,
    6.7544940645056936637e-4,
    -1.1747678412476953373e-4,
];
const D9: [f64; 18] = [
    3.8077947363878346589e-2,
    2.4383467461259035373e-1,
    6.048231236901111119e-1,
    6.5728807805130053808e-1,
    1.3319738582500757619e-1,
    -2.9327378327917490881e-1,
    -9.6840783222976460514e-2,
    1.4854074933810638014e-1,
    3.0725681479333379212e-2,
    -6.7632829061329973676e-2,
    2.5094711483145195759e-4,
    2.2361662123679097205e-2,
    -4.7232047577513972779e-3,
    -4.2815036824634298345e-3,
    1.8476468830562264766e-3,
    2.3038576352319596721e-4,
    -2.5196318894271013697e-4,
    3.9347320316271599481e-5,
];
const D10: [f64; 20] = [
    2.6670057900555553587e-2,
    1.8817680007769148902e-1,
    5.2720118893172558648e-1,
    6.8845903945360356574e-1,
    2.8117234366057746075e-1,
    -2.4984642432731537942e-1,
    -1.959462743773770435e-1,
    1.2736934033579326008e-1,
    9.305736460357235116e-2,
    -7.1394147166397087145e-2,
    -2.9457536821875812858e-2,
    3.321267405934100174e-2,
    3.6065535669561696554e-3,
    -1.0733175483330575044e-2,
    1.3953517470529011658e-3,
    1.9924052951850561172e-3,
    -6.8585669495971162656e-4,
    -1.1646685512928545095e-4,
    9.3588670320069591334e-5,
    -1.3264202894521244812e-5,
];

/// Largest supported filter order.
pub const MAX_ORDER: usize = 10;

/// Low-pass filter `h_0..h_{2N-1}` of the Daubechies D-N scaling function,
/// normalized so that `Σ h = √2`.
pub fn filter(order: usize) -> Result<&'static [f64]> {
    Ok(match order {
        1 => &D1,
        2 => &D2,
        3 => &D3,
        4 => &D4,
        5 => &D5,
        6 => &D6,
        7 => &D7,
        8 => &D8,
        9 => &D9,
        10 => &D10,
        _ => {
            return Err(Error::Config(format!(
                "daubechies order {order} unsupported (1..={MAX_ORDER})"
            )))
        }
    })
}

/// Father wavelet tabulated on the dyadic grid `j / 2^level` over `[0, 2N-1]`.
#[derive(Debug, Clone)]
pub struct ScalingTable<T> {
    order: usize,
    level: u32,
    values: Vec<T>,
}

impl<T: Scalar> ScalingTable<T> {
    /// Build the table: exact values at the integers from the refinement
    /// eigenproblem, then dyadic refinement down to `2^-level`.
    pub fn new(order: usize, level: u32) -> Result<Self> {
        let h = filter(order)?;
        if level < 1 {
            return Err(Error::Config("scaling table level must be at least 1".into()));
        }
        if level > 24 {
            return Err(Error::Config(format!("scaling table level {level} too fine")));
        }
        let support = 2 * order - 1;
        let step = 1usize << level;
        let len = support * step + 1;
        let mut values = vec![0.0f64; len];

        if order == 1 {
            // Haar: indicator of [0, 1]; the right endpoint is closed in the table
            // so that the trapezoid rule integrates it exactly.
            values.iter_mut().for_each(|v| *v = 1.0);
        } else {
            let ints = integer_values(h)?;
            for (i, v) in ints.iter().enumerate() {
                values[i * step] = *v;
            }
            let sqrt2 = std::f64::consts::SQRT_2;
            for lv in 1..=level {
                // Points of the form odd / 2^lv.
                let stride = 1usize << (level - lv);
                let coarse = stride * 2;
                let mut j = stride;
                while j < len {
                    let mut acc = 0.0;
                    for (k, hk) in h.iter().enumerate() {
                        // 2x - k on the final grid: 2j - k * 2^level.
                        let idx = 2 * j as isize - (k * step) as isize;
                        if idx >= 0 && (idx as usize) < len {
                            debug_assert_eq!(idx as usize % coarse.min(step), 0);
                            acc += hk * values[idx as usize];
                        }
                    }
                    values[j] = sqrt2 * acc;
                    j += coarse;
                }
            }
        }
        Ok(Self {
            order,
            level,
            values: values.into_iter().map(lit).collect(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Grid spacing `2^-level`.
    pub fn spacing(&self) -> T {
        lit(1.0 / (1u64 << self.level) as f64)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Right end of the support, `2N - 1`.
    pub fn support_end(&self) -> usize {
        2 * self.order - 1
    }

    /// Value at `x`, linearly interpolated between dyadic points.
    pub fn eval(&self, x: T) -> T {
        let end = lit::<T>(self.support_end() as f64);
        if x < T::zero() || x > end {
            return T::zero();
        }
        if self.order == 1 {
            return if x < T::one() { T::one() } else { T::zero() };
        }
        let pos = x * lit::<T>((1u64 << self.level) as f64);
        let j = crate::scalar::to_f64(pos.floor()) as usize;
        if j + 1 >= self.values.len() {
            return self.values[self.values.len() - 1];
        }
        let frac = pos - lit::<T>(j as f64);
        self.values[j] * (T::one() - frac) + self.values[j + 1] * frac
    }

    /// Trapezoid-rule integral over the table.
    pub fn integral(&self) -> T {
        let n = self.values.len();
        let inner = self.values[1..n - 1].iter().fold(T::zero(), |a, &v| a + v);
        (inner + (self.values[0] + self.values[n - 1]) * lit(0.5)) * self.spacing()
    }
}

/// Values of the scaling function at `1..=2N-2`, normalized to sum to one.
fn integer_values(h: &[f64]) -> Result<Vec<f64>> {
    let support = h.len() - 1;
    let k = support - 1;
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut a = nalgebra::DMatrix::<f64>::zeros(k, k);
    for i in 1..=k {
        for j in 1..=k {
            let idx = 2 * i as isize - j as isize;
            if idx >= 0 && (idx as usize) < h.len() {
                a[(i - 1, j - 1)] = sqrt2 * h[idx as usize];
            }
        }
        a[(i - 1, i - 1)] -= 1.0;
    }
    let mut rhs = nalgebra::DVector::<f64>::zeros(k);
    for j in 0..k {
        a[(k - 1, j)] = 1.0;
    }
    rhs[k - 1] = 1.0;
    let sol = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Config("scaling-function eigenproblem is singular".into()))?;
    let mut out = vec![0.0; support + 1];
    for i in 0..k {
        out[i + 1] = sol[i];
    }
    Ok(out)
}

/// Periodized scaling functions `φ_{J,k}(x) = 2^{J/2} Σ_l φ(2^J (x + l) - k)`,
/// `k = 0..2^J`, orthonormal on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct PeriodizedScaling<T> {
    table: ScalingTable<T>,
    resolution: u32,
}

impl<T: Scalar> PeriodizedScaling<T> {
    pub fn new(order: usize, resolution: u32) -> Result<Self> {
        if resolution > 16 {
            return Err(Error::Config(format!("wavelet resolution {resolution} too fine")));
        }
        let table = ScalingTable::new(order, (resolution + 6).max(10))?;
        Ok(Self { table, resolution })
    }

    /// Number of translates at this resolution.
    pub fn dimension(&self) -> usize {
        1usize << self.resolution
    }

    pub fn eval_all(&self, x: T, out: &mut [T]) {
        let scale = (1u64 << self.resolution) as f64;
        let norm = lit::<T>(scale.sqrt());
        let xs = x * lit::<T>(scale);
        let end = self.table.support_end() as f64;
        let xs64 = crate::scalar::to_f64(xs);
        for (k, v) in out.iter_mut().enumerate() {
            let kf = k as f64;
            let l_min = ((kf - xs64) / scale).ceil() as i64 - 1;
            let l_max = ((kf + end - xs64) / scale).floor() as i64 + 1;
            let mut acc = T::zero();
            for l in l_min..=l_max {
                let z = xs + lit::<T>(scale * l as f64 - kf);
                acc += self.table.eval(z);
            }
            *v = norm * acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn filter_moment_conditions() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for n in 1..=MAX_ORDER {
            let h = filter(n).unwrap();
            let even: f64 = h.iter().step_by(2).sum();
            let odd: f64 = h.iter().skip(1).step_by(2).sum();
            assert_abs_diff_eq!(even, s, epsilon = 1e-12);
            assert_abs_diff_eq!(odd, s, epsilon = 1e-12);
            for l in 0..n {
                let dot: f64 = (2 * l..h.len()).map(|k| h[k] * h[k - 2 * l]).sum();
                assert_abs_diff_eq!(dot, if l == 0 { 1.0 } else { 0.0 }, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn unsupported_order() {
        assert!(filter(0).is_err());
        assert!(filter(11).is_err());
    }

    #[test]
    fn scaling_function_integrates_to_one() {
        for n in 1..=MAX_ORDER {
            let table = ScalingTable::<f64>::new(n, 10).unwrap();
            assert_abs_diff_eq!(table.integral(), 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn haar_is_indicator() {
        let table = ScalingTable::<f64>::new(1, 4).unwrap();
        for &x in &[0.0, 0.3, 0.999] {
            assert_eq!(table.eval(x), 1.0);
        }
        assert_eq!(table.eval(1.0), 0.0);
        assert_eq!(table.eval(-0.1), 0.0);
    }

    #[test]
    fn d2_known_integer_values() {
        // φ(1) = (1 + √3) / 2, φ(2) = (1 - √3) / 2 for D2.
        let table = ScalingTable::<f64>::new(2, 3).unwrap();
        let step = 8;
        let r3 = 3f64.sqrt();
        assert_abs_diff_eq!(table.values()[step], (1.0 + r3) / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(table.values()[2 * step], (1.0 - r3) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn partition_of_unity() {
        let table = ScalingTable::<f64>::new(4, 10).unwrap();
        for &x in &[0.1, 0.37, 0.5] {
            let s: f64 = (0..8).map(|k| table.eval(x + k as f64)).sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-6);
        }
    }
}
