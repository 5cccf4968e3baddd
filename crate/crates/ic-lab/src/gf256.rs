//! GF(256) arithmetic and a shortened systematic Reed-Solomon code with
//! errors-and-erasures decoding.
//!
//! Field: GF(2^8) mod x^8 + x^4 + x^3 + x^2 + 1 (0x11d), generator alpha = 2.
//! Code: codeword position `i` carries the coefficient of x^(n-1-i); the
//! first `k` positions are the message (systematic), the rest are parity
//! chosen so every codeword has roots alpha^1 .. alpha^(n-k).

use std::sync::OnceLock;

struct Tables {
    exp: [u8; 512],
    log: [u16; 256],
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let mut exp = [0u8; 512];
        let mut log = [0u16; 256];
        let mut x = 1u16;
        for i in 0..255 {
            exp[i] = x as u8;
            log[x as usize] = i as u16;
            x <<= 1;
            if x & 0x100 != 0 {
                x ^= 0x11d;
            }
        }
        for i in 255..512 {
            exp[i] = exp[i - 255];
        }
        Tables { exp, log }
    })
}

pub(crate) fn mul(a: u8, b: u8) -> u8 {
    if a == 0 || b == 0 {
        return 0;
    }
    let t = tables();
    t.exp[t.log[a as usize] as usize + t.log[b as usize] as usize]
}

pub(crate) fn inv(a: u8) -> u8 {
    assert!(a != 0, "inverse of zero");
    let t = tables();
    t.exp[255 - t.log[a as usize] as usize]
}

pub(crate) fn div(a: u8, b: u8) -> u8 {
    mul(a, inv(b))
}

/// alpha^e for e >= 0.
pub(crate) fn alpha_pow(e: usize) -> u8 {
    tables().exp[e % 255]
}

/// Polynomial evaluation; coefficients low degree first.
fn poly_eval(poly: &[u8], x: u8) -> u8 {
    let mut acc = 0u8;
    for &c in poly.iter().rev() {
        acc = mul(acc, x) ^ c;
    }
    acc
}

/// A shortened Reed-Solomon code over GF(256).
#[derive(Debug, Clone)]
pub(crate) struct ReedSolomon {
    pub n: usize,
    pub k: usize,
    /// Generator polynomial, low degree first, degree n-k, monic.
    gen: Vec<u8>,
}

impl ReedSolomon {
    pub fn new(n: usize, k: usize) -> ReedSolomon {
        assert!(0 < k && k <= n && n <= 255, "bad RS parameters n={n} k={k}");
        let p = n - k;
        // g(x) = prod_{j=1..p} (x - alpha^j); subtraction is xor
        let mut gen = vec![0u8; p + 1];
        gen[0] = 1;
        let mut deg = 0;
        for j in 1..=p {
            let root = alpha_pow(j);
            // multiply by (x + root), low-first: new[i+1] += old[i]; new[i] += root*old[i]
            for i in (0..=deg).rev() {
                let c = gen[i];
                gen[i + 1] ^= c;
                gen[i] = mul(c, root);
            }
            deg += 1;
        }
        ReedSolomon { n, k, gen }
    }

    pub fn parity_len(&self) -> usize {
        self.n - self.k
    }

    /// Systematic encoding: `[msg | parity]`.
    pub fn encode(&self, msg: &[u8]) -> Vec<u8> {
        assert_eq!(msg.len(), self.k);
        let p = self.parity_len();
        let mut word = vec![0u8; self.n];
        word[..self.k].copy_from_slice(msg);
        if p == 0 {
            return word;
        }
        // long division of msg(x) * x^p by g(x); remainder becomes the parity
        let mut rem = vec![0u8; p];
        for &m in msg {
            let factor = m ^ rem[0];
            rem.rotate_left(1);
            rem[p - 1] = 0;
            if factor != 0 {
                for (i, r) in rem.iter_mut().enumerate() {
                    // gen is monic of degree p: coefficient of x^(p-1-i) is gen[p-1-i]
                    *r ^= mul(factor, self.gen[p - 1 - i]);
                }
            }
        }
        word[self.k..].copy_from_slice(&rem);
        word
    }

    /// Syndromes S_1 .. S_p of a received word (all zero iff codeword).
    pub fn syndromes(&self, word: &[u8]) -> Vec<u8> {
        assert_eq!(word.len(), self.n);
        (1..=self.parity_len())
            .map(|j| {
                let a = alpha_pow(j);
                let mut acc = 0u8;
                for &r in word {
                    acc = mul(acc, a) ^ r;
                }
                acc
            })
            .collect()
    }

    pub fn is_codeword(&self, word: &[u8]) -> bool {
        self.syndromes(word).iter().all(|&s| s == 0)
    }

    /// Errors-and-erasures bounded-distance decoding.
    ///
    /// Corrects e errors and s erasures whenever 2e + s <= n - k. Returns the
    /// corrected codeword, or None when decoding fails. Erasure positions out
    /// of range are rejected by assertion (caller bug).
    pub fn decode(&self, word: &[u8], erasures: &[usize]) -> Option<Vec<u8>> {
        assert_eq!(word.len(), self.n);
        let p = self.parity_len();
        let s_count = erasures.len();
        if s_count > p {
            return None;
        }
        let synd = self.syndromes(word);
        if synd.iter().all(|&s| s == 0) {
            return Some(word.to_vec());
        }

        // Erasure locator Gamma(x) = prod (1 - X_k x), with X_k = alpha^(n-1-pos).
        let mut lambda = vec![0u8; p + 2];
        lambda[0] = 1;
        for &pos in erasures {
            assert!(pos < self.n, "erasure position out of range");
            let x_k = alpha_pow(self.n - 1 - pos);
            for i in (0..=s_count).rev() {
                let c = lambda[i];
                if c != 0 {
                    lambda[i + 1] ^= mul(c, x_k);
                }
            }
        }

        // Berlekamp-Massey seeded with the erasure locator.
        let mut b = lambda.clone();
        let mut el = s_count;
        for r in (s_count + 1)..=p {
            let mut discr = 0u8;
            for i in 0..r {
                if lambda[i] != 0 {
                    discr ^= mul(lambda[i], synd[r - i - 1]);
                }
            }
            if discr == 0 {
                b.rotate_right(1);
                b[0] = 0;
            } else {
                let mut t = vec![0u8; p + 2];
                t[0] = lambda[0];
                for i in 0..p {
                    t[i + 1] = lambda[i + 1] ^ mul(discr, b[i]);
                }
                t[p + 1] = lambda[p + 1];
                if 2 * el <= r + s_count - 1 {
                    el = r + s_count - el;
                    let d_inv = inv(discr);
                    for i in 0..=p + 1 {
                        b[i] = mul(lambda[i], d_inv);
                    }
                } else {
                    b.rotate_right(1);
                    b[0] = 0;
                }
                lambda = t;
            }
        }

        let deg_lambda = match lambda.iter().rposition(|&c| c != 0) {
            Some(d) => d,
            None => return None,
        };
        if deg_lambda > p {
            return None;
        }

        // Chien search over the n shortened positions.
        let mut positions = Vec::with_capacity(deg_lambda);
        for i in 0..self.n {
            let x_inv = alpha_pow(255 - ((self.n - 1 - i) % 255));
            if poly_eval(&lambda[..=deg_lambda], x_inv) == 0 {
                positions.push(i);
            }
        }
        if positions.len() != deg_lambda {
            return None; // roots outside the shortened code, or repeated
        }

        // Omega(x) = Lambda(x) * S(x) mod x^p.
        let mut omega = vec![0u8; p];
        for i in 0..p {
            let mut acc = 0u8;
            for j in 0..=i.min(deg_lambda) {
                acc ^= mul(lambda[j], synd[i - j]);
            }
            omega[i] = acc;
        }

        // Forney: e_i = Omega(X_i^-1) / Lambda'(X_i^-1).
        let mut out = word.to_vec();
        for &i in &positions {
            let x_inv = alpha_pow(255 - ((self.n - 1 - i) % 255));
            let num = poly_eval(&omega, x_inv);
            // derivative in characteristic 2: odd-degree terms only
            let mut den = 0u8;
            let x_inv_sq = mul(x_inv, x_inv);
            let mut pow = 1u8;
            let mut j = 1;
            while j <= deg_lambda {
                den ^= mul(lambda[j], pow);
                pow = mul(pow, x_inv_sq);
                j += 2;
            }
            if den == 0 {
                return None;
            }
            out[i] ^= div(num, den);
        }
        if self.is_codeword(&out) {
            Some(out)
        } else {
            None
        }
    }
}
