use proptest::prelude::*;

use super::*;
use crate::rational::q;

/// Maps with up to four pieces, no constant piece, values on a coarse grid.
fn pwl_strategy() -> impl Strategy<Value = PwlMap> {
    (1usize..=4)
        .prop_flat_map(|k| {
            (
                proptest::sample::subsequence((1..12).collect::<Vec<i64>>(), k - 1),
                proptest::collection::vec(0i64..=6, k + 1),
            )
        })
        .prop_filter_map("constant piece", |(inner, vals)| {
            if vals.windows(2).any(|w| w[0] == w[1]) {
                return None;
            }
            let mut xs = vec![q(0, 1)];
            xs.extend(inner.iter().map(|&n| q(n, 12)));
            xs.push(q(1, 1));
            PwlMap::new(xs, vals.iter().map(|&v| q(v, 6)).collect()).ok()
        })
}

fn unit_rational() -> impl Strategy<Value = Q> {
    (0i64..=30).prop_map(|n| q(n, 30))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn variation_pushes_forward(f in pwl_strategy(), a in unit_rational(), b in unit_rational(), n in 0usize..=5) {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let (lo, hi) = f.image_of(&a, &b).unwrap();
        let mut iv = IterVariation::new(&f);
        let image = iv.on_interval(n, &lo, &hi).unwrap();
        let here = iv.on_interval(n + 1, &a, &b).unwrap();
        prop_assert!(image <= here);
    }

    #[test]
    fn variation_below_lipschitz_power(f in pwl_strategy()) {
        let lip = f.lipschitz_constant();
        let mut iv = IterVariation::new(&f);
        for n in 1..=10usize {
            prop_assert!(iv.total(n) <= num_traits::pow(lip.clone(), n));
        }
    }

    #[test]
    fn iterates_compose(f in pwl_strategy(), a in 0usize..=3, b in 0usize..=3) {
        let sum = f.iterate(a + b).unwrap();
        let chained = f.iterate(b).unwrap().compose(&f.iterate(a).unwrap(), DEFAULT_BREAKPOINT_CAP).unwrap();
        let product = f.iterate(a * b).unwrap();
        let nested = f.iterate(a).unwrap().iterate(b).unwrap();
        for k in 0..=60 {
            let x = q(k, 60);
            prop_assert_eq!(sum.eval(&x).unwrap(), chained.eval(&x).unwrap());
            prop_assert_eq!(product.eval(&x).unwrap(), nested.eval(&x).unwrap());
        }
    }

    #[test]
    fn preimage_counts_split_over_first_step(f in pwl_strategy(), x in (1i64..60).prop_map(|n| q(n, 61)), n in 0usize..=4) {
        let total = preimage_count(&f, &x, n + 1, None).unwrap();
        let split: u128 = f
            .preimages_once(&x)
            .unwrap()
            .iter()
            .map(|y| preimage_count(&f, y, n, None).unwrap())
            .sum();
        prop_assert_eq!(total, split);
    }

    #[test]
    fn multiplicity_matches_listing(f in pwl_strategy(), k in -1i64..=7) {
        // values k/6 hit breakpoint values and the ends of [0,1]
        let y = q(k, 6);
        prop_assert_eq!(f.preimage_multiplicity(&y).unwrap(), f.preimages_of(&y).unwrap().len());
        let z = q(2 * k + 1, 12);
        prop_assert_eq!(f.preimage_multiplicity(&z).unwrap(), f.preimages_of(&z).unwrap().len());
    }

    #[test]
    fn prefix_variation_is_monotone(f in pwl_strategy(), a in unit_rational(), b in unit_rational()) {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(f.variation_on_prefix(&a).unwrap() <= f.variation_on_prefix(&b).unwrap());
    }
}
