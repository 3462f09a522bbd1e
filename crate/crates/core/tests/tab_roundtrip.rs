use drumsense::tab::{cell_duration, parse_tab, BeatEvent, DrumId, DrumTab};
use proptest::prelude::*;

const DRUMS: [&str; 3] = ["HH", "SN", "TM"];

fn arb_tab() -> impl Strategy<Value = DrumTab> {
    (
        (120u32..=480).prop_map(|h| f64::from(h) / 2.0),
        1u32..=8,
        (0u32..2000).prop_map(|ms| f64::from(ms) / 1000.0),
        prop::collection::btree_set((0usize..3, 0u32..48), 1..40),
    )
        .prop_map(|(tempo_bpm, div, offset_s, strikes)| {
            let cell = cell_duration(tempo_bpm, div);
            let mut events: Vec<BeatEvent> = strikes
                .into_iter()
                .map(|(d, c)| BeatEvent { time_s: offset_s + f64::from(c) * cell, cell: c, drum_id: DrumId::from(DRUMS[d]) })
                .collect();
            events.sort_by(|a, b| a.time_s.total_cmp(&b.time_s).then_with(|| a.drum_id.cmp(&b.drum_id)));
            DrumTab { tempo_bpm, div, offset_s, events }
        })
}

proptest! {
    #[test]
    fn serialize_then_parse_is_identity(tab in arb_tab()) {
        let text = tab.serialize();
        let back = parse_tab(&text).unwrap();
        prop_assert_eq!(back.tempo_bpm, tab.tempo_bpm);
        prop_assert_eq!(back.div, tab.div);
        prop_assert_eq!(back.offset_s, tab.offset_s);
        prop_assert_eq!(back.events.len(), tab.events.len());
        for (a, b) in back.events.iter().zip(&tab.events) {
            prop_assert_eq!(a.cell, b.cell);
            prop_assert_eq!(&a.drum_id, &b.drum_id);
            prop_assert!((a.time_s - b.time_s).abs() <= 1e-12);
        }
        // The canonical form is a fixed point.
        prop_assert_eq!(back.serialize(), text);
    }

    #[test]
    fn parser_never_panics(text in "[A-Za-z0-9_:|x\\-. \t\r\n#]{0,300}") {
        let _ = parse_tab(&text);
    }

    #[test]
    fn parser_never_panics_on_arbitrary_unicode(text in any::<String>()) {
        let _ = parse_tab(&text);
    }
}
