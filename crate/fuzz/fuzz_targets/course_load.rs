#![no_main]

use cargame_core::course;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(c) = course::load(data) {
        assert!(course::validate(&c).is_empty());
        let bytes = course::save(&c).expect("loaded course saves");
        assert_eq!(course::load(&bytes).expect("saved course loads"), c);
        let mut ed = course::CourseEditor::new(c);
        let _ = ed.add(course::ObstacleKind::Stone, 0.0, 0.0, 0.1);
    }
});
