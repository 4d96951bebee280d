use crate::error::{Error, Result};

/// `KL(p || q)` in nats, with `0 log(0/q) = 0`. Returns `+inf` when `q(i) = 0 < p(i)`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::SupportMismatch(p.len(), q.len()));
    }
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi <= 0.0 {
            continue;
        }
        if qi <= 0.0 {
            return Ok(f64::INFINITY);
        }
        total += pi * (pi / qi).ln();
    }
    Ok(total.max(0.0))
}

/// `sum |p - q|`, twice the total variation distance.
pub fn l1_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::SupportMismatch(p.len(), q.len()));
    }
    Ok(p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kl_examples() {
        let p = [0.5, 0.5];
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        // 0.5 ln 2 + 0.5 ln(2/3), evaluated in extended precision offline
        let v = kl_divergence(&p, &[0.25, 0.75]).unwrap();
        assert!((v - 0.143_841_036_225_890_46).abs() < 1e-15, "{v}");
        assert!(kl_divergence(&[1.0, 0.0], &[0.0, 1.0]).unwrap().is_infinite());
        assert!(matches!(kl_divergence(&p, &[1.0]), Err(Error::SupportMismatch(2, 1))));
    }

    #[test]
    fn l1_examples() {
        let p = [0.5, 0.5];
        assert_eq!(l1_distance(&p, &p).unwrap(), 0.0);
        assert_eq!(l1_distance(&p, &[0.25, 0.75]).unwrap(), 0.5);
        assert_eq!(l1_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 2.0);
    }

    fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.001f64..1.0, n).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #[test]
        fn kl_nonnegative_and_zero_on_diagonal(p in simplex(5), q in simplex(5)) {
            let d = kl_divergence(&p, &q).unwrap();
            prop_assert!(d >= 0.0);
            prop_assert!(kl_divergence(&p, &p).unwrap().abs() < 1e-15);
            if l1_distance(&p, &q).unwrap() > 1e-6 {
                prop_assert!(d > 0.0);
            }
        }

        #[test]
        fn l1_triangle_and_symmetry(p in simplex(4), q in simplex(4), r in simplex(4)) {
            let pq = l1_distance(&p, &q).unwrap();
            prop_assert_eq!(pq, l1_distance(&q, &p).unwrap());
            prop_assert!(pq <= 2.0 + 1e-12);
            prop_assert!(pq <= l1_distance(&p, &r).unwrap() + l1_distance(&r, &q).unwrap() + 1e-12);
        }

        #[test]
        fn pinsker(p in simplex(6), q in simplex(6)) {
            let kl = kl_divergence(&p, &q).unwrap();
            prop_assert!(l1_distance(&p, &q).unwrap() <= 2.0 * (2.0 * kl).sqrt() + 1e-12);
        }
    }
}
