#![no_main]

use cargame_core::protocol::{accumulate_telemetry, LineAccumulator, MAX_LINE};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&split, bytes)) = data.split_first() else {
        return;
    };
    let (whole_acc, whole) = accumulate_telemetry(LineAccumulator::new(), bytes);
    let mut acc = LineAccumulator::new();
    let mut events = Vec::new();
    for chunk in bytes.chunks(usize::from(split).max(1)) {
        events.extend(acc.push(chunk));
    }
    assert_eq!(events, whole);
    assert_eq!(acc, whole_acc);
    assert!(acc.pending().len() <= MAX_LINE);
});
