#![no_main]

use cargame_core::session::{replay, RunLog};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(log) = RunLog::from_json(data) {
        // Keep each run short; the tick count is attacker controlled.
        if log.ticks <= 2_000 {
            let _ = replay(&log);
        }
        let _ = RunLog::from_json(&log.to_json());
    }
});
