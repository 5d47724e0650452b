#![no_main]

use cargame_core::firmware::{DutyTable, FirmwareState, PinLevel};
use cargame_core::{decode_command, encode_command};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let mut fw = FirmwareState::new(DutyTable::default());
    for (i, &b) in data.iter().enumerate() {
        if let Some(cmd) = decode_command(b) {
            assert_eq!(encode_command(cmd), b);
        }
        fw.ingest_byte(b);
        fw.step(1 + (i as u32 % 50));
        let [a, b2, c, d] = fw.hbridge.pins();
        assert!(!(a == PinLevel::High && b2 == PinLevel::High));
        assert!(!(c == PinLevel::High && d == PinLevel::High));
    }
});
