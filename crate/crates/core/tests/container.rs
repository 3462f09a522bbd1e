use drumsense::record::{decode_record, MMFrame, MultimodalRecord, RecordMeta, JOINT_COUNT};
use proptest::prelude::*;

fn arb_record() -> impl Strategy<Value = MultimodalRecord> {
    (1usize..4, 1u32..9, 1u32..9, prop::sample::select(vec![10u32, 25]), 1u32..40, 0usize..4, any::<u64>(), 0.0f64..1.0)
        .prop_flat_map(|(n, w, h, fps, spf, n_drums, seed, noise_sigma)| {
            let pixels = (w * h) as usize;
            let frame = (
                prop::array::uniform6(-10.0f32..10.0),
                prop::array::uniform6(-10.0f32..10.0),
                prop::collection::vec(any::<u8>(), pixels),
                prop::collection::vec(-1.0f32..1.0, spf as usize),
                prop::collection::vec(0.0f32..20.0, 128),
                any::<u8>(),
            )
                .prop_map(move |(q, qd, image, audio, spec, bits)| {
                    // Contact bits may only name drums listed in the metadata.
                    let contacts = bits & ((1u16 << n_drums) - 1) as u8;
                    MMFrame { q, qd, image, audio, spec, contacts }
                });
            let meta = RecordMeta {
                frame_rate: fps,
                sample_rate: fps * spf,
                image_width: w,
                image_height: h,
                joint_count: JOINT_COUNT as u32,
                drums: ["HH", "SN", "TM"][..n_drums].iter().map(|s| s.to_string()).collect(),
                tab: "HH|x-|\n".into(),
                seed,
                noise_sigma,
            };
            prop::collection::vec(frame, n).prop_map(move |frames| MultimodalRecord { meta: meta.clone(), frames })
        })
}

/// Independent frame-size arithmetic: q and qd as f32, one byte per
/// pixel, f32 audio and 128 f32 spectrum bins, one contact byte.
fn expected_len(rec: &MultimodalRecord) -> usize {
    let meta_len = serde_json::to_vec(&rec.meta).unwrap().len();
    let m = &rec.meta;
    let spf = (m.sample_rate / m.frame_rate) as usize;
    let frame = 2 * 6 * 4 + (m.image_width * m.image_height) as usize + spf * 4 + 128 * 4 + 1;
    4 + 2 + 4 + meta_len + 4 + rec.frames.len() * frame + 4
}

proptest! {
    #[test]
    fn round_trip_is_bit_identical(rec in arb_record()) {
        let bytes = rec.to_bytes().unwrap();
        prop_assert_eq!(bytes.len(), expected_len(&rec));
        prop_assert_eq!(bytes.len(), rec.encoded_len());
        let back = decode_record(&bytes).unwrap();
        prop_assert_eq!(&back, &rec);
        prop_assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn single_bit_flips_are_rejected(rec in arb_record(), pos in any::<prop::sample::Index>(), bit in 0u8..8) {
        let mut bytes = rec.to_bytes().unwrap();
        let i = pos.index(bytes.len());
        bytes[i] ^= 1 << bit;
        prop_assert!(decode_record(&bytes).is_err());
    }

    #[test]
    fn fuzzed_headers_never_panic(rec in arb_record(), edits in prop::collection::vec((0usize..64, any::<u8>()), 1..8)) {
        let mut bytes = rec.to_bytes().unwrap();
        for (i, v) in edits {
            if i < bytes.len() {
                bytes[i] = v;
            }
        }
        let _ = decode_record(&bytes);
    }

    #[test]
    fn truncations_never_panic(rec in arb_record(), cut in any::<prop::sample::Index>()) {
        let bytes = rec.to_bytes().unwrap();
        let n = cut.index(bytes.len());
        prop_assert!(decode_record(&bytes[..n]).is_err());
    }

    #[test]
    fn garbage_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        let _ = decode_record(&bytes);
    }
}
