//! Property tests of the invariants that span module boundaries.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trofdm::channel::apply_channel;
use trofdm::channel::ChannelTapList;
use trofdm::frontend::{estimate_doppler, synchronize};
use trofdm::signal::{energy, fft, resample, rms_error, BasebandSignal, LowpassFilter};
use trofdm::sparse::{bpdn_estimate, build_dictionary, tau_rule, BpdnOptions, LinearOperator};
use trofdm::tr::vtrp;
use trofdm::tx::{build_frame, build_ofdm_block, make_lfm, qpsk_map, random_bits, OfdmConfig, PilotLayout};
use trofdm::Complex64;

const FS: f64 = 48_000.0;

fn random_signal(len: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn smooth_signal(len: usize, seed: u64) -> BasebandSignal {
    // band-limited well below Nyquist so interpolation is accurate
    let lp = LowpassFilter::new(FS / 8.0, FS);
    let raw = lp.apply(&random_signal(len + 400, seed));
    BasebandSignal::new(raw[200..200 + len].to_vec(), FS).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn parseval_holds_for_any_length(len in 1usize..700, seed in 0u64..10_000) {
        let x = random_signal(len, seed);
        let mut spec = x.clone();
        fft::forward(&mut spec);
        let lhs = energy(&x);
        let rhs = energy(&spec) / len as f64;
        prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs);
    }

    #[test]
    fn resampling_round_trip_is_near_identity(a in -1e-3f64..1e-3, seed in 0u64..10_000) {
        let x = smooth_signal(1500, seed);
        let y = resample(&resample(&x, 1.0 + a).unwrap(), 1.0 / (1.0 + a)).unwrap();
        let n = y.len().min(x.len()) - 40;
        let err = rms_error(&x.samples()[20..n], &y.samples()[20..n]);
        let scale = (x.mean_power()).sqrt();
        prop_assert!(err <= 1e-3 * scale, "err {err}");
    }

    #[test]
    fn blocks_are_cyclic_and_band_limited(spacing in prop::sample::select(vec![3usize, 5]), seed in 0u64..10_000) {
        let cfg = OfdmConfig { pilot_spacing: spacing, ..OfdmConfig::default() };
        let layout = PilotLayout::new(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let syms = qpsk_map(&random_bits(2 * layout.data_count(), &mut rng)).unwrap();
        let block = build_ofdm_block(&syms, &layout, &cfg).unwrap();
        let s = block.samples();
        let (pre, n, post) = (cfg.prefix_len(), cfg.fft_size, cfg.postfix_len());
        prop_assert_eq!(&s[..pre], &s[n..n + pre]);
        prop_assert_eq!(&s[pre + n..], &s[pre..pre + post]);
        let mut body = s[pre..pre + n].to_vec();
        fft::forward(&mut body);
        let used: std::collections::HashSet<usize> =
            cfg.subcarrier_indices().map(|k| fft::bin_index(k, n)).collect();
        let peak = body.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (i, v) in body.iter().enumerate() {
            if !used.contains(&i) {
                prop_assert!(v.norm() <= 1e-12 * peak);
            }
        }
        let mut all: Vec<i64> = layout.pilot_indices.iter().chain(&layout.data_indices).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, cfg.subcarrier_indices().collect::<Vec<_>>());
    }

    #[test]
    fn focusing_collects_every_path(paths in 2usize..9, seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut h = vec![Complex64::new(0.0, 0.0); 40 * paths];
        for p in 0..paths {
            h[p * 37 + rng.random_range(0..3)] = Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
        }
        let h = BasebandSignal::new(h, FS).unwrap();
        let out = vtrp(&BasebandSignal::new(random_signal(8, seed), FS).unwrap(), &h, Some(&h), 0).unwrap();
        let focus = out.tr_channel.samples()[out.focus_index].norm_sqr();
        prop_assert!(focus >= paths as f64 * 1.0 - 1e-9);
    }

    #[test]
    fn bpdn_never_loses_to_the_zero_vector(seed in 0u64..10_000, sigma in 0.0f64..1.0) {
        let d = build_dictionary(&make_lfm(&OfdmConfig::default()), 48, 2400).unwrap();
        let y = random_signal(d.rows(), seed);
        let peak = d.adjoint(&y).iter().map(|v| v.norm()).fold(0.0, f64::max);
        let tau = tau_rule(sigma, peak);
        let est = bpdn_estimate(&y, &d, sigma, &BpdnOptions::default()).unwrap();
        let l1: f64 = est.taps.iter().map(|v| v.norm()).sum();
        prop_assert!(0.5 * est.residual_energy + tau * l1 <= 0.5 * energy(&y) * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn detection_ignores_overall_gain(gain in 1e-3f64..1e3) {
        let cfg = OfdmConfig::default();
        let pilots = PilotLayout::new(&cfg);
        let (frame, layout, _) = build_frame(&[1, 0, 1, 1], &cfg, &pilots).unwrap();
        let mut padded = vec![Complex64::new(0.0, 0.0); 700];
        padded.extend_from_slice(frame.samples());
        padded.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), 3000));
        let buf = BasebandSignal::new(padded, FS).unwrap();
        let rx = apply_channel(&buf, &ChannelTapList::identity().with_uniform_doppler(4e-4), cfg.f_c).unwrap();
        let scaled = rx.scaled(Complex64::new(gain, 0.0));
        let (s1, s2) = (synchronize(&rx, &cfg).unwrap(), synchronize(&scaled, &cfg).unwrap());
        prop_assert_eq!(s1.frame_start, s2.frame_start);
        let d1 = estimate_doppler(&rx, &s1, &layout, &cfg, 0).unwrap();
        let d2 = estimate_doppler(&scaled, &s2, &layout, &cfg, 0).unwrap();
        prop_assert!((d1.a_hat - d2.a_hat).abs() <= 1e-12);
    }
}
