//! Sobol low-discrepancy sequence in base 2 (gray-code order).
//!
//! Direction numbers for dimensions 2..=64 are the Joe–Kuo "new-joe-kuo-6"
//! primitive polynomials and initial values; dimension 1 is the van der
//! Corput sequence.

use super::DesignError;

/// Largest supported dimension.
pub const MAX_DIM: usize = 64;

const BITS: usize = 32;

/// `(degree s, polynomial coefficients a, initial direction numbers m)`.
#[rustfmt::skip]
const TABLE: [(u32, u32, &[u32]); MAX_DIM - 1] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
    (6, 19, &[1, 1, 1, 15, 7, 5]),
    (6, 22, &[1, 3, 1, 15, 13, 25]),
    (6, 25, &[1, 1, 5, 5, 19, 61]),
    (7, 1, &[1, 3, 7, 11, 23, 15, 103]),
    (7, 4, &[1, 3, 7, 13, 13, 15, 69]),
    (7, 7, &[1, 1, 3, 13, 7, 35, 63]),
    (7, 8, &[1, 3, 5, 9, 1, 25, 53]),
    (7, 14, &[1, 3, 1, 13, 9, 35, 107]),
    (7, 19, &[1, 3, 1, 5, 27, 61, 31]),
    (7, 21, &[1, 1, 5, 11, 19, 41, 61]),
    (7, 28, &[1, 3, 5, 3, 3, 13, 69]),
    (7, 31, &[1, 1, 7, 13, 1, 19, 1]),
    (7, 32, &[1, 3, 7, 5, 13, 19, 59]),
    (7, 37, &[1, 1, 3, 9, 25, 29, 41]),
    (7, 41, &[1, 3, 5, 13, 23, 1, 55]),
    (7, 42, &[1, 3, 7, 3, 13, 59, 17]),
    (7, 50, &[1, 3, 1, 3, 5, 53, 69]),
    (7, 55, &[1, 1, 5, 5, 23, 33, 13]),
    (7, 56, &[1, 1, 7, 7, 1, 61, 123]),
    (7, 59, &[1, 1, 7, 9, 13, 61, 49]),
    (7, 62, &[1, 3, 3, 5, 3, 55, 33]),
    (8, 14, &[1, 3, 1, 15, 31, 13, 49, 245]),
    (8, 21, &[1, 3, 5, 15, 31, 59, 63, 97]),
    (8, 22, &[1, 3, 1, 11, 11, 11, 77, 249]),
    (8, 38, &[1, 3, 1, 11, 27, 43, 71, 9]),
    (8, 47, &[1, 1, 7, 15, 21, 11, 81, 45]),
    (8, 49, &[1, 3, 7, 3, 25, 31, 65, 79]),
    (8, 50, &[1, 3, 1, 1, 19, 11, 3, 205]),
    (8, 52, &[1, 1, 5, 9, 19, 21, 29, 157]),
    (8, 56, &[1, 3, 7, 11, 1, 33, 89, 185]),
    (8, 67, &[1, 3, 3, 3, 15, 9, 79, 71]),
    (8, 70, &[1, 3, 7, 11, 15, 39, 119, 27]),
    (8, 84, &[1, 1, 3, 1, 11, 31, 97, 225]),
    (8, 97, &[1, 1, 1, 3, 23, 43, 57, 177]),
    (8, 103, &[1, 3, 7, 7, 17, 17, 37, 71]),
    (8, 115, &[1, 3, 1, 5, 27, 63, 123, 213]),
    (8, 122, &[1, 1, 3, 5, 11, 43, 53, 133]),
    (9, 8, &[1, 3, 5, 5, 29, 17, 47, 173, 479]),
    (9, 13, &[1, 3, 3, 11, 3, 1, 109, 9, 69]),
    (9, 16, &[1, 1, 1, 5, 17, 39, 23, 5, 343]),
    (9, 22, &[1, 3, 1, 5, 25, 15, 31, 103, 499]),
    (9, 25, &[1, 1, 1, 11, 11, 17, 63, 105, 183]),
    (9, 44, &[1, 1, 5, 11, 9, 29, 97, 231, 363]),
    (9, 47, &[1, 1, 5, 15, 19, 45, 41, 7, 383]),
    (9, 52, &[1, 3, 7, 7, 31, 19, 83, 137, 221]),
    (9, 55, &[1, 1, 1, 3, 23, 15, 111, 223, 83]),
    (9, 59, &[1, 1, 5, 13, 31, 15, 55, 25, 161]),
    (9, 62, &[1, 1, 3, 13, 25, 47, 39, 87, 257]),];

fn direction_numbers(dim: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if dim == 0 {
        for (k, vk) in v.iter_mut().enumerate() {
            *vk = 1 << (BITS - 1 - k);
        }
        return v;
    }
    let (s, a, m) = TABLE[dim - 1];
    let s = s as usize;
    for k in 0..BITS {
        if k < s {
            v[k] = m[k] << (BITS - 1 - k);
        } else {
            let mut x = v[k - s] ^ (v[k - s] >> s);
            for i in 1..s {
                if (a >> (s - 1 - i)) & 1 == 1 {
                    x ^= v[k - i];
                }
            }
            v[k] = x;
        }
    }
    v
}

/// Points `skip..skip + n` of the `d`-dimensional sequence.
pub fn sobol_points(d: usize, n: usize, skip: usize) -> Result<Vec<Vec<f64>>, DesignError> {
    if d == 0 || d > MAX_DIM {
        return Err(DesignError::SobolDimension { dim: d, max: MAX_DIM });
    }
    let v: Vec<[u32; BITS]> = (0..d).map(direction_numbers).collect();
    let scale = 1.0 / (1u64 << BITS) as f64;
    let mut x = vec![0u32; d];
    let mut out = Vec::with_capacity(n);
    for i in 0..(skip + n) {
        if i >= skip {
            out.push(x.iter().map(|&xi| xi as f64 * scale).collect());
        }
        // x_{i+1} = x_i ^ v[c], c = position of the lowest zero bit of i
        let c = (!i).trailing_zeros() as usize;
        if c >= BITS {
            break;
        }
        for (xj, vj) in x.iter_mut().zip(&v) {
            *xj ^= vj[c];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_first() {
        assert_eq!(sobol_points(1, 1, 0).unwrap(), vec![vec![0.0]]);
    }

    #[test]
    fn one_dimension_after_skip() {
        let p = sobol_points(1, 3, 1).unwrap();
        assert_eq!(p, vec![vec![0.5], vec![0.75], vec![0.25]]);
    }

    #[test]
    fn two_dimensional_halves_balanced() {
        let p = sobol_points(2, 4, 0).unwrap();
        for j in 0..2 {
            assert_eq!(p.iter().filter(|x| x[j] < 0.5).count(), 2);
        }
    }

    #[test]
    fn dyadic_balance_of_projections() {
        for k in 1..=8 {
            let n = 1usize << k;
            let p = sobol_points(MAX_DIM, n, 0).unwrap();
            for j in 0..MAX_DIM {
                let mut bins = vec![0usize; n];
                for x in &p {
                    bins[(x[j] * n as f64) as usize] += 1;
                }
                assert!(bins.iter().all(|&b| b == 1), "dim {j}, n {n}");
            }
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(sobol_points(5, 10, 1).unwrap(), sobol_points(5, 10, 1).unwrap());
    }

    #[test]
    fn dimension_limit() {
        assert!(sobol_points(MAX_DIM + 1, 1, 0).is_err());
        assert!(sobol_points(0, 1, 0).is_err());
    }
}
