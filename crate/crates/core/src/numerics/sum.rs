//! Compensated (Kahan-Babuska-Neumaier) summation.
//!
//! Every reduction that feeds a reported number goes through these helpers in
//! a fixed order, which is what makes outputs reproducible across thread
//! counts: parallelism is confined to elementwise maps, never to reductions.

use num_complex::Complex64;

pub fn kbn<I: IntoIterator<Item = f64>>(items: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in items {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn kbn_complex<I: IntoIterator<Item = Complex64>>(items: I) -> Complex64 {
    let mut re_sum = 0.0f64;
    let mut re_comp = 0.0f64;
    let mut im_sum = 0.0f64;
    let mut im_comp = 0.0f64;
    for z in items {
        let t = re_sum + z.re;
        if re_sum.abs() >= z.re.abs() {
            re_comp += (re_sum - t) + z.re;
        } else {
            re_comp += (z.re - t) + re_sum;
        }
        re_sum = t;
        let u = im_sum + z.im;
        if im_sum.abs() >= z.im.abs() {
            im_comp += (im_sum - u) + z.im;
        } else {
            im_comp += (z.im - u) + im_sum;
        }
        im_sum = u;
    }
    Complex64::new(re_sum + re_comp, im_sum + im_comp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancellation() {
        // 1 + 1e100 - 1e100 + ... pattern that naive summation destroys
        let items = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(kbn(items), 2.0);
    }

    #[test]
    fn complex_matches_componentwise() {
        let items: Vec<Complex64> = (0..1000)
            .map(|i| Complex64::new(1.0 / (i + 1) as f64, (-1.0f64).powi(i)))
            .collect();
        let z = kbn_complex(items.iter().copied());
        assert_eq!(z.re, kbn(items.iter().map(|z| z.re)));
        assert_eq!(z.im, kbn(items.iter().map(|z| z.im)));
    }
}
