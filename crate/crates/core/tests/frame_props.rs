use proptest::prelude::*;
use semshield::experiments::{run_ber_sweep, ChannelConfig, ExperimentConfig};
use semshield::obfuscation::{deobfuscate, deobfuscate_air, obfuscate, ObfuscatedFrame, ObfuscationParams};
use semshield::ofdm_phy::ChannelKind;
use semshield::semantic_codec::CodecModel;
use semshield::BitString;

fn params() -> impl Strategy<Value = ObfuscationParams> {
    (1u32..=6, 2u32..=64, 1u32..=6)
        .prop_flat_map(|(s_max, n_d, b)| (Just(s_max), 1..n_d.min(20), Just(n_d), Just(b)))
        .prop_map(|(s_max, k_max, n_d, b)| ObfuscationParams::new(s_max, k_max, n_d, b).unwrap())
}

fn bits(max: usize) -> impl Strategy<Value = BitString> {
    prop::collection::vec(any::<bool>(), 1..max).prop_map(BitString::from_bools)
}

proptest! {
    #[test]
    fn obfuscation_round_trips(p in params(), data in bits(3000), seed in bits(257)) {
        let codec = CodecModel::new(4096, 0.1, 1).unwrap();
        let frame = obfuscate(&data, &seed, &p, &codec).unwrap();
        prop_assert_eq!(frame.l_d, data.len() as u64);
        prop_assert_eq!(frame.air_len() % p.symbol_bits(), 0);
        prop_assert_eq!(&deobfuscate(&frame, &seed, &p).unwrap(), &data);
        prop_assert_eq!(&deobfuscate_air(&frame.air_bits(), frame.l_d, &seed, &p).unwrap(), &data);
    }

    #[test]
    fn frame_bytes_round_trip(p in params(), data in bits(2000), seed in bits(129)) {
        let codec = CodecModel::new(4096, 0.1, 1).unwrap();
        let frame = obfuscate(&data, &seed, &p, &codec).unwrap();
        let parsed = ObfuscatedFrame::from_bytes(&frame.to_bytes(), &p).unwrap();
        prop_assert_eq!(parsed, frame);
    }

    #[test]
    fn obfuscation_is_deterministic(p in params(), data in bits(1000), seed in bits(129)) {
        let codec = CodecModel::new(4096, 0.1, 1).unwrap();
        prop_assert_eq!(obfuscate(&data, &seed, &p, &codec).unwrap(), obfuscate(&data, &seed, &p, &codec).unwrap());
    }

    #[test]
    fn truncated_frame_bytes_are_rejected(data in bits(500), cut in 1usize..8) {
        let p = ObfuscationParams::default();
        let codec = CodecModel::new(4096, 0.1, 1).unwrap();
        let frame = obfuscate(&data, &BitString::zeros(128), &p, &codec).unwrap();
        let bytes = frame.to_bytes();
        prop_assert!(ObfuscatedFrame::from_bytes(&bytes[..bytes.len() - cut], &p).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    // Random configurations through the whole sweep with no noise: both the
    // plain and the encrypted legitimate chains must be error free.
    #[test]
    fn noiseless_sweep_is_error_free(
        p in params(),
        n_bits in 1usize..20_000,
        frame_bits in 1usize..8192,
        refresh in 1usize..4,
        seed in any::<u64>(),
        kind in prop_oneof![
            Just(ChannelKind::Awgn),
            Just(ChannelKind::RayleighFlat),
            Just(ChannelKind::RayleighMultipath)
        ],
        taps in 1usize..=16,
        static_channel in any::<bool>(),
    ) {
        let cfg = ExperimentConfig {
            snr_list: vec![f64::INFINITY],
            n_bits,
            frame_bits,
            refresh_period: refresh,
            obfuscation: p,
            channel: ChannelConfig { kind, taps },
            master_seed: seed,
            static_channel,
            n_sentences: 20,
            plk_probes: 512,
            ..Default::default()
        };
        let rows = run_ber_sweep(&cfg).unwrap();
        prop_assert_eq!(rows[0].ber_plain, 0.0);
        prop_assert_eq!(rows[0].ber_legit, 0.0);
    }
}
