//! Wigner small-d matrices.
//!
//! Entries are indexed by twice-spin integers: row `a` of the spin-`l` block
//! carries `m = l - a`. The convention is that of `exp(-i beta J_y)`, so the
//! spin-1/2 block is `[[cos(b/2), -sin(b/2)], [sin(b/2), cos(b/2)]]`.

/// Explicit finite sum; used to seed the recursion and as an independent oracle.
pub fn wigner_d_sum(two_j: i64, two_mp: i64, two_m: i64, beta: f64) -> f64 {
    let (c, s) = ((beta / 2.0).cos(), (beta / 2.0).sin());
    let jpmp = (two_j + two_mp) / 2;
    let jmmp = (two_j - two_mp) / 2;
    let jpm = (two_j + two_m) / 2;
    let jmm = (two_j - two_m) / 2;
    let mpmm = (two_mp - two_m) / 2;
    let pref = 0.5 * (ln_fact(jpmp) + ln_fact(jmmp) + ln_fact(jpm) + ln_fact(jmm));
    let lo = 0.max(-mpmm);
    let hi = jpm.min(jmmp);
    let mut acc = 0.0;
    for k in lo..=hi {
        let den = ln_fact(jpm - k) + ln_fact(k) + ln_fact(mpmm + k) + ln_fact(jmmp - k);
        let pc = two_j - mpmm - 2 * k;
        let ps = mpmm + 2 * k;
        let mag = (pref - den).exp() * powi(c, pc) * powi(s, ps);
        if (mpmm + k).rem_euclid(2) == 1 {
            acc -= mag;
        } else {
            acc += mag;
        }
    }
    acc
}

fn powi(x: f64, p: i64) -> f64 {
    if p == 0 {
        1.0
    } else {
        x.powi(p as i32)
    }
}

fn ln_fact(n: i64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// All blocks `d^l(beta)` for `2l = 0..=two_l_max`, each row-major `d x d`.
pub fn wigner_d_all(two_l_max: u32, beta: f64) -> Vec<Vec<f64>> {
    let lmax = two_l_max as i64;
    let mut out: Vec<Vec<f64>> = (0..=lmax).map(|t| vec![0.0; ((t + 1) * (t + 1)) as usize]).collect();
    if beta == 0.0 {
        for (t, blk) in out.iter_mut().enumerate() {
            for a in 0..=t {
                blk[a * (t + 1) + a] = 1.0;
            }
        }
        return out;
    }
    let cb = beta.cos();
    for tm in -lmax..=lmax {
        for tmp in -lmax..=lmax {
            if (tm - tmp).rem_euclid(2) != 0 {
                continue;
            }
            let t0 = tm.abs().max(tmp.abs());
            let m = tm as f64 / 2.0;
            let mp = tmp as f64 / 2.0;
            let mut prev = 0.0;
            let mut cur = wigner_d_sum(t0, tmp, tm, beta);
            store(&mut out, t0, tmp, tm, cur);
            let mut t = t0;
            while t + 2 <= lmax {
                let j = t as f64 / 2.0;
                let j1 = j + 1.0;
                let den = ((j1 * j1 - m * m) * (j1 * j1 - mp * mp)).sqrt();
                let mix = if t == 0 { 0.0 } else { m * mp / (j * j1) };
                let a = j1 * (2.0 * j + 1.0) / den * (cb - mix);
                let b = if t == 0 { 0.0 } else { ((j * j - m * m) * (j * j - mp * mp)).sqrt() / den * j1 / j };
                let next = a * cur - b * prev;
                prev = cur;
                cur = next;
                t += 2;
                store(&mut out, t, tmp, tm, cur);
            }
        }
    }
    out
}

fn store(out: &mut [Vec<f64>], t: i64, tmp: i64, tm: i64, v: f64) {
    let d = (t + 1) as usize;
    let row = ((t - tmp) / 2) as usize;
    let col = ((t - tm) / 2) as usize;
    out[t as usize][row * d + col] = v;
}
