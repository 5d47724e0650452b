#![no_main]

use cargame_core::wire::{parse_client_message, Notice, ServerMessage};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    match parse_client_message(text) {
        Ok(msg) => assert_eq!(parse_client_message(&msg.to_json()).unwrap(), msg),
        Err(e) => {
            let _ = ServerMessage::from(Notice::error(&e)).to_json();
        }
    }
});
