//! Qualitative behavior on the pulse data that the unit suites do not reach.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use symae::bounds::empirical_mse;
use symae::data_io::generate_pga;
use symae::init::{derive_seed, eys_init, orthogonal_random_init};
use symae::training::{prepare, width_sweep};
use symae::{Activation, ClassTag};

#[test]
fn eys_start_improves_with_latent_width_but_random_starts_do_not() {
    let data = prepare(&generate_pga(400, 0).unwrap().u, 0).unwrap();
    let act = Activation::hyp_act_with_sharpness(0.5).unwrap();
    let skels = width_sweep(514, 20).unwrap();

    let eys: Vec<f64> = skels
        .iter()
        .map(|s| empirical_mse(&eys_init(&data.train, s, act).unwrap().model, &data.test).unwrap())
        .collect();
    for (k, w) in eys.windows(2).enumerate() {
        assert!(w[1] <= 1.05 * w[0], "n2 = {}: {:.3e} after {:.3e}", k + 2, w[1], w[0]);
    }
    assert!(eys[19] < 1e-3 * eys[0], "{eys:?}");

    // Same random stream for every width: the latent size barely matters.
    let random: Vec<f64> = skels
        .iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(11, 0));
            let model = orthogonal_random_init(s, act, &mut rng, ClassTag::Sae).unwrap();
            empirical_mse(&model, &data.test).unwrap()
        })
        .collect();
    let (lo, hi) = random
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &m| (lo.min(m), hi.max(m)));
    assert!(hi / lo <= 2.0 && lo / hi >= 0.5, "{random:?}");
}
