//! Randomized structural laws that should hold for every admissible input,
//! not just the worked examples.

use nalgebra::DVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use charflow_core::jet_contact::{contact_form_at, JetPoint, VectorField};
use charflow_core::odd_symplectic::{matrix_exponential, GeneratorU};
use charflow_core::QuadraticPDE;

proptest! {
    // exp(s1 U) exp(s2 U) = exp((s1 + s2) U): the one-parameter group law.
    #[test]
    fn exponentials_compose_along_one_parameter(
        seed in 0u64..u64::MAX / 2,
        s1 in -2.0f64..2.0,
        s2 in -2.0f64..2.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 1 + (seed % 3) as usize;
        let u = GeneratorU::random(n, 1.5, &mut rng);
        let left = matrix_exponential(&u, s1).matrix() * matrix_exponential(&u, s2).matrix();
        let right = matrix_exponential(&u, s1 + s2);
        let scale = 1.0 + left.amax().max(right.matrix().amax());
        let gap = (&left - right.matrix()).amax();
        prop_assert!(gap <= 1e-9 * scale, "gap={gap:.3e} scale={scale:.3e}");
    }

    // Every exponential lands in the group cut out by the extended form.
    #[test]
    fn exponentials_stay_in_the_group(
        seed in 0u64..u64::MAX / 2,
        s in -2.0f64..2.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 1 + (seed % 3) as usize;
        let u = GeneratorU::random(n, 1.5, &mut rng);
        let g = matrix_exponential(&u, s);
        prop_assert!(g.is_odd_symplectic(1e-9));
    }

    // theta = dz - y.dx vanishes on the characteristic field everywhere,
    // on or off the zero level.
    #[test]
    fn contact_form_annihilates_characteristic_fields(
        seed in 0u64..u64::MAX / 2,
        coords in prop::collection::vec(-2.0f64..2.0, 7),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 1 + (seed % 3) as usize;
        let pde = QuadraticPDE::random(n, &mut rng);
        let x = DVector::from_iterator(n, coords[..n].iter().copied());
        let y = DVector::from_iterator(n, coords[3..3 + n].iter().copied());
        let p = JetPoint::new(x, y, coords[6])?;
        let v = pde.characteristic_field().value(&p)?;
        let pairing = contact_form_at(&p, &v).abs();
        let scale = 1.0 + v.dz.abs();
        prop_assert!(pairing <= 1e-12 * scale, "pairing={pairing:.3e}");
    }
}
