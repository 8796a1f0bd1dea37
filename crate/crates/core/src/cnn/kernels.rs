//! Dense loops for the classifier. Tensors are flat `[n][c][h][w]`.
//!
//! Convolutions are 4 taps wide with same padding (1 left, 2 right) and
//! valid along the row axis.

use super::Scalar;

pub const KW: usize = 4;
const PAD_LEFT: usize = 1;

/// Sum of products with fixed lane order, so results do not depend on
/// how the compiler vectorises.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut s = T::zero();
    for v in acc {
        s += v;
    }
    for (x, y) in ra.iter().zip(rb) {
        s += *x * *y;
    }
    s
}

#[derive(Debug, Clone, Copy)]
pub struct ConvShape {
    pub n: usize,
    pub cin: usize,
    pub cout: usize,
    pub h: usize,
    pub kh: usize,
    pub w: usize,
}

impl ConvShape {
    pub fn hout(&self) -> usize {
        self.h + 1 - self.kh
    }
    pub fn in_len(&self) -> usize {
        self.n * self.cin * self.h * self.w
    }
    pub fn out_len(&self) -> usize {
        self.n * self.cout * self.hout() * self.w
    }
    pub fn kernel_len(&self) -> usize {
        self.cout * self.cin * self.kh * KW
    }
}

/// Kernel layout `[cout][cin][kh][KW]`.
pub fn conv_forward<T: Scalar>(x: &[T], k: &[T], bias: Option<&[T]>, s: ConvShape) -> Vec<T> {
    let mut out = vec![T::zero(); s.out_len()];
    let mut pad = Padded::new(s.cin * s.h, s.w, PAD_LEFT);
    for b in 0..s.n {
        pad.load(&x[b * s.cin * s.h * s.w..][..s.cin * s.h * s.w]);
        let ob = &mut out[b * s.cout * s.hout() * s.w..][..s.cout * s.hout() * s.w];
        conv_sample(&pad, k, bias, s.cin, s.cout, s.h, s.kh, s.w, ob);
    }
    out
}

/// Rows of one sample with `pad_left` zeros before and `KW - 1 - pad_left` after.
struct Padded<T> {
    data: Vec<T>,
    stride: usize,
    w: usize,
    pad_left: usize,
}

impl<T: Scalar> Padded<T> {
    fn new(rows: usize, w: usize, pad_left: usize) -> Self {
        let stride = w + KW - 1;
        Self {
            data: vec![T::zero(); rows * stride],
            stride,
            w,
            pad_left,
        }
    }

    fn load(&mut self, rows: &[T]) {
        for (dst, src) in self.data.chunks_exact_mut(self.stride).zip(rows.chunks_exact(self.w)) {
            dst[self.pad_left..self.pad_left + self.w].copy_from_slice(src);
        }
    }

    #[inline]
    fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.stride..(r + 1) * self.stride]
    }
}

/// `out[j] += Σ_t k[t] * p[j + t]` for `j < out.len()`; `p` has `out.len() + 3` entries.
#[inline]
fn correlate4<T: Scalar>(out: &mut [T], p: &[T], k: &[T]) {
    let w = out.len();
    let (k0, k1, k2, k3) = (k[0], k[1], k[2], k[3]);
    let (p0, p1, p2, p3) = (&p[0..w], &p[1..w + 1], &p[2..w + 2], &p[3..w + 3]);
    for j in 0..w {
        out[j] += k0 * p0[j] + k1 * p1[j] + k2 * p2[j] + k3 * p3[j];
    }
}

/// [`correlate4`] into two outputs sharing the input loads.
#[inline]
fn correlate4x2<T: Scalar>(oa: &mut [T], ob: &mut [T], p: &[T], ka: &[T], kb: &[T]) {
    let w = oa.len();
    let ob = &mut ob[..w];
    let (a0, a1, a2, a3) = (ka[0], ka[1], ka[2], ka[3]);
    let (b0, b1, b2, b3) = (kb[0], kb[1], kb[2], kb[3]);
    let (p0, p1, p2, p3) = (&p[0..w], &p[1..w + 1], &p[2..w + 2], &p[3..w + 3]);
    for j in 0..w {
        oa[j] += a0 * p0[j] + a1 * p1[j] + a2 * p2[j] + a3 * p3[j];
        ob[j] += b0 * p0[j] + b1 * p1[j] + b2 * p2[j] + b3 * p3[j];
    }
}

/// One sample: `out[o][ro][j] = bias[o] + Σ_i Σ_dr Σ_t k[o][i][dr][t] · p[i][ro + dr][j + t]`.
#[allow(clippy::too_many_arguments)]
fn conv_sample<T: Scalar>(
    p: &Padded<T>,
    k: &[T],
    bias: Option<&[T]>,
    cin: usize,
    cout: usize,
    h: usize,
    kh: usize,
    w: usize,
    out: &mut [T],
) {
    let ho = h + 1 - kh;
    if let Some(bias) = bias {
        for (o, chunk) in out.chunks_exact_mut(ho * w).enumerate() {
            chunk.fill(bias[o]);
        }
    }
    let kidx = |o: usize, i: usize, dr: usize| ((o * cin + i) * kh + dr) * KW;
    for i in 0..cin {
        for dr in 0..kh {
            for ro in 0..ho {
                let row = p.row(i * h + ro + dr);
                let mut o = 0;
                while o + 1 < cout {
                    let (lo, hi) = out.split_at_mut((o + 1) * ho * w);
                    let oa = &mut lo[(o * ho + ro) * w..][..w];
                    let ob = &mut hi[ro * w..][..w];
                    correlate4x2(oa, ob, row, &k[kidx(o, i, dr)..][..KW], &k[kidx(o + 1, i, dr)..][..KW]);
                    o += 2;
                }
                if o < cout {
                    correlate4(&mut out[(o * ho + ro) * w..][..w], row, &k[kidx(o, i, dr)..][..KW]);
                }
            }
        }
    }
}

/// Gradients of `conv_forward` given the output gradient `g`.
///
/// Returns `(dx, dk, dbias)`; `dx` is empty when `need_dx` is false.
pub fn conv_backward<T: Scalar>(
    x: &[T],
    k: &[T],
    g: &[T],
    s: ConvShape,
    need_dx: bool,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let (w, h, ho) = (s.w, s.h, s.hout());
    let mut dk = vec![T::zero(); s.kernel_len()];
    let mut db = vec![T::zero(); s.cout];
    let mut pad = Padded::new(s.cin * h, w, PAD_LEFT);
    for b in 0..s.n {
        let gb = &g[b * s.cout * ho * w..(b + 1) * s.cout * ho * w];
        for (o, chunk) in gb.chunks_exact(ho * w).enumerate() {
            db[o] += sum_lanes(chunk);
        }
        pad.load(&x[b * s.cin * h * w..][..s.cin * h * w]);
        for i in 0..s.cin {
            for dr in 0..s.kh {
                for ro in 0..ho {
                    let prow = pad.row(i * h + ro + dr);
                    let mut o = 0;
                    while o + 1 < s.cout {
                        let ga = &gb[(o * ho + ro) * w..][..w];
                        let gc = &gb[((o + 1) * ho + ro) * w..][..w];
                        let (ta, tc) = dot4x2(ga, gc, prow);
                        let ka = ((o * s.cin + i) * s.kh + dr) * KW;
                        let kc = (((o + 1) * s.cin + i) * s.kh + dr) * KW;
                        for t in 0..KW {
                            dk[ka + t] += ta[t];
                            dk[kc + t] += tc[t];
                        }
                        o += 2;
                    }
                    if o < s.cout {
                        let ga = &gb[(o * ho + ro) * w..][..w];
                        let (ta, _) = dot4x2(ga, ga, prow);
                        let ka = ((o * s.cin + i) * s.kh + dr) * KW;
                        for t in 0..KW {
                            dk[ka + t] += ta[t];
                        }
                    }
                }
            }
        }
    }
    if !need_dx {
        return (Vec::new(), dk, db);
    }
    // dx[i][r][x] = Σ_o Σ_dr Σ_t k[o][i][dr][t] g[o][r - dr][x + 1 - t]: a
    // forward conv of g (padded 2 left, 1 right) with the kernel transposed
    // in channels, reversed in taps and flipped in rows over a height-padded g.
    let hg = ho + 2 * (s.kh - 1);
    let mut kt = vec![T::zero(); s.kernel_len()];
    for o in 0..s.cout {
        for i in 0..s.cin {
            for dr in 0..s.kh {
                for t in 0..KW {
                    kt[((i * s.cout + o) * s.kh + (s.kh - 1 - dr)) * KW + t] =
                        k[((o * s.cin + i) * s.kh + dr) * KW + (KW - 1 - t)];
                }
            }
        }
    }
    let mut dx = vec![T::zero(); s.in_len()];
    let mut gpad = Padded::new(s.cout * hg, w, KW - 1 - PAD_LEFT);
    let mut grows = vec![T::zero(); s.cout * hg * w];
    for b in 0..s.n {
        let gb = &g[b * s.cout * ho * w..][..s.cout * ho * w];
        for o in 0..s.cout {
            for ro in 0..ho {
                grows[(o * hg + ro + s.kh - 1) * w..][..w].copy_from_slice(&gb[(o * ho + ro) * w..][..w]);
            }
        }
        gpad.load(&grows);
        let xb = &mut dx[b * s.cin * h * w..][..s.cin * h * w];
        conv_sample(&gpad, &kt, None, s.cout, s.cin, hg, s.kh, w, xb);
    }
    (dx, dk, db)
}

/// `Σ_j a[j] p[j + t]` and `Σ_j c[j] p[j + t]` for `t < KW`, in fixed lane order.
#[inline]
fn dot4x2<T: Scalar>(a: &[T], c: &[T], p: &[T]) -> ([T; KW], [T; KW]) {
    const L: usize = 4;
    let w = a.len();
    let (a, c, p) = (&a[..w], &c[..w], &p[..w + KW - 1]);
    let mut sa = [[T::zero(); L]; KW];
    let mut sc = [[T::zero(); L]; KW];
    let full = w / L * L;
    let mut j = 0;
    while j < full {
        let (av, cv) = (&a[j..j + L], &c[j..j + L]);
        let pv = &p[j..j + L + KW - 1];
        for l in 0..L {
            for t in 0..KW {
                sa[t][l] += av[l] * pv[l + t];
                sc[t][l] += cv[l] * pv[l + t];
            }
        }
        j += L;
    }
    let mut ra = [T::zero(); KW];
    let mut rc = [T::zero(); KW];
    for t in 0..KW {
        for l in 0..L {
            ra[t] += sa[t][l];
            rc[t] += sc[t][l];
        }
        for jj in full..w {
            ra[t] += a[jj] * p[jj + t];
            rc[t] += c[jj] * p[jj + t];
        }
    }
    (ra, rc)
}

/// Sum with 8 interleaved partial sums.
#[inline]
pub fn sum_lanes<T: Scalar>(v: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let chunks = v.chunks_exact(8);
    let rem = chunks.remainder();
    for ch in chunks {
        for l in 0..8 {
            acc[l] += ch[l];
        }
    }
    let mut s = T::zero();
    for a in acc {
        s += a;
    }
    for &r in rem {
        s += r;
    }
    s
}

/// 1×2 max pool with stride 2 along the last axis.
pub fn maxpool_forward<T: Scalar>(h: &[T], w: usize) -> Vec<T> {
    debug_assert_eq!(w % 2, 0);
    h.chunks_exact(2).map(|p| if p[1] > p[0] { p[1] } else { p[0] }).collect::<Vec<_>>()
}

/// Routes each pooled gradient to the larger input (the first on ties).
pub fn maxpool_backward<T: Scalar>(h: &[T], g: &[T]) -> Vec<T> {
    let mut dh = vec![T::zero(); h.len()];
    for ((p, d), &gv) in h.chunks_exact(2).zip(dh.chunks_exact_mut(2)).zip(g) {
        if p[1] > p[0] {
            d[1] = gv;
        } else {
            d[0] = gv;
        }
    }
    dh
}

#[inline]
pub fn leaky<T: Scalar>(v: T, slope: T) -> T {
    if v > T::zero() {
        v
    } else {
        v * slope
    }
}

/// Per-channel statistics for a `[n][c][m]` tensor: `(mean, variance)`.
pub fn channel_stats<T: Scalar>(z: &[T], n: usize, c: usize, m: usize) -> (Vec<f64>, Vec<f64>) {
    let count = (n * m) as f64;
    let mut mean = vec![0.0; c];
    let mut var = vec![0.0; c];
    for ch in 0..c {
        let rows = || (0..n).map(|b| &z[(b * c + ch) * m..][..m]);
        let mu = rows().map(|r| sum_lanes(r).f64()).sum::<f64>() / count;
        let mt = T::of(mu);
        // Rows are short enough that element-type partial sums are accurate;
        // rows are combined in f64.
        let q: f64 = rows()
            .map(|r| {
                let mut acc = [T::zero(); 8];
                let chunks = r.chunks_exact(8);
                let rem = chunks.remainder();
                for chunk in chunks {
                    for l in 0..8 {
                        let d = chunk[l] - mt;
                        acc[l] += d * d;
                    }
                }
                let mut s = acc.iter().fold(T::zero(), |a, &v| a + v);
                for &v in rem {
                    s += (v - mt) * (v - mt);
                }
                s.f64()
            })
            .sum();
        mean[ch] = mu;
        var[ch] = q / count;
    }
    (mean, var)
}

/// `leaky(gamma * (z - mean) * istd + beta)` per channel.
#[allow(clippy::too_many_arguments)]
pub fn bn_leaky_forward<T: Scalar>(
    z: &[T],
    n: usize,
    c: usize,
    m: usize,
    mean: &[f64],
    istd: &[f64],
    gamma: &[T],
    beta: &[T],
    slope: T,
) -> Vec<T> {
    let mut h = vec![T::zero(); z.len()];
    for b in 0..n {
        for ch in 0..c {
            let scale = T::of(gamma[ch].f64() * istd[ch]);
            let shift = T::of(beta[ch].f64() - gamma[ch].f64() * istd[ch] * mean[ch]);
            let r = (b * c + ch) * m;
            for (hv, &zv) in h[r..r + m].iter_mut().zip(&z[r..r + m]) {
                *hv = leaky(scale * zv + shift, slope);
            }
        }
    }
    h
}

/// Backward through leaky and training-mode batch norm.
///
/// `h` is the forward output; its sign equals the sign of the pre-activation.
/// Returns `(dz, dgamma, dbeta)`.
#[allow(clippy::too_many_arguments)]
pub fn bn_leaky_backward<T: Scalar>(
    z: &[T],
    h: &[T],
    dh: &[T],
    n: usize,
    c: usize,
    m: usize,
    mean: &[f64],
    istd: &[f64],
    gamma: &[T],
    slope: T,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let count = (n * m) as f64;
    // dz first holds d(pre-activation).
    let mut dz: Vec<T> = h
        .iter()
        .zip(dh)
        .map(|(&hv, &g)| if hv > T::zero() { g } else { g * slope })
        .collect();
    let mut dgamma = vec![T::zero(); c];
    let mut dbeta = vec![T::zero(); c];
    for ch in 0..c {
        let (mu, is) = (T::of(mean[ch]), T::of(istd[ch]));
        let mut sum_da = 0.0;
        let mut sum_da_xhat = 0.0;
        for b in 0..n {
            let r = (b * c + ch) * m;
            let (da, zr) = (&dz[r..r + m], &z[r..r + m]);
            sum_da += sum_lanes(da).f64();
            let mut acc = [T::zero(); 8];
            let (dc, zc) = (da.chunks_exact(8), zr.chunks_exact(8));
            let (drem, zrem) = (dc.remainder(), zc.remainder());
            for (dv, zv) in dc.zip(zc) {
                for l in 0..8 {
                    acc[l] += dv[l] * (zv[l] - mu);
                }
            }
            let mut s = acc.iter().fold(T::zero(), |a, &v| a + v);
            for (&dv, &zv) in drem.iter().zip(zrem) {
                s += dv * (zv - mu);
            }
            sum_da_xhat += s.f64() * istd[ch];
        }
        dgamma[ch] = T::of(sum_da_xhat);
        dbeta[ch] = T::of(sum_da);
        let g = T::of(gamma[ch].f64() * istd[ch] / count);
        let (cnt, sda, sdx) = (T::of(count), T::of(sum_da), T::of(sum_da_xhat));
        for b in 0..n {
            let r = (b * c + ch) * m;
            for (d, &zv) in dz[r..r + m].iter_mut().zip(&z[r..r + m]) {
                let xhat = (zv - mu) * is;
                *d = g * (cnt * *d - sda - xhat * sdx);
            }
        }
    }
    (dz, dgamma, dbeta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_conv(x: &[f64], k: &[f64], s: ConvShape) -> Vec<f64> {
        let ho = s.hout();
        let mut out = vec![0.0; s.out_len()];
        for b in 0..s.n {
            for o in 0..s.cout {
                for ro in 0..ho {
                    for j in 0..s.w {
                        let mut acc = 0.0;
                        for i in 0..s.cin {
                            for dr in 0..s.kh {
                                for t in 0..KW {
                                    let xi = j as isize + t as isize - PAD_LEFT as isize;
                                    if xi < 0 || xi >= s.w as isize {
                                        continue;
                                    }
                                    acc += k[((o * s.cin + i) * s.kh + dr) * KW + t]
                                        * x[((b * s.cin + i) * s.h + ro + dr) * s.w + xi as usize];
                                }
                            }
                        }
                        out[((b * s.cout + o) * ho + ro) * s.w + j] = acc;
                    }
                }
            }
        }
        out
    }

    fn ramp(n: usize, a: f64) -> Vec<f64> {
        (0..n).map(|i| ((i as f64 * a).sin() * 1.7).fract()).collect()
    }

    #[test]
    fn conv_matches_direct_sum() {
        for kh in [1, 2] {
            let s = ConvShape { n: 2, cin: 3, cout: 2, h: 2, kh, w: 9 };
            let x = ramp(s.in_len(), 0.37);
            let k = ramp(s.kernel_len(), 1.3);
            let fast = conv_forward(&x, &k, None, s);
            let slow = direct_conv(&x, &k, s);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_backward_is_the_adjoint() {
        // <conv(x), g> = <x, dx> = <k, dk> for a linear map.
        let s = ConvShape { n: 2, cin: 3, cout: 4, h: 2, kh: 2, w: 11 };
        let x = ramp(s.in_len(), 0.11);
        let k = ramp(s.kernel_len(), 0.7);
        let g = ramp(s.out_len(), 0.23);
        let y = conv_forward(&x, &k, None, s);
        let lhs: f64 = y.iter().zip(&g).map(|(a, b)| a * b).sum();
        let (dx, dk, _) = conv_backward(&x, &k, &g, s, true);
        let via_x: f64 = x.iter().zip(&dx).map(|(a, b)| a * b).sum();
        let via_k: f64 = k.iter().zip(&dk).map(|(a, b)| a * b).sum();
        assert!((lhs - via_x).abs() < 1e-10);
        assert!((lhs - via_k).abs() < 1e-10);
    }

    #[test]
    fn dot_matches_naive() {
        let a = ramp(37, 0.5);
        let b = ramp(37, 0.9);
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }

    #[test]
    fn maxpool_routes_to_winner() {
        let h = [1.0, 3.0, -2.0, -2.0];
        assert_eq!(maxpool_forward(&h, 4), vec![3.0, -2.0]);
        assert_eq!(maxpool_backward(&h, &[5.0, 7.0]), vec![0.0, 5.0, 7.0, 0.0]);
    }
}
