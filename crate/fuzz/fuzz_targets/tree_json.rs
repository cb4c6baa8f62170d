#![no_main]

use libfuzzer_sys::fuzz_target;
use srt_core::graph::{check_monotonic, propagate_differents, ReductionTree};

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(tree) = ReductionTree::from_json(s) {
            let _ = check_monotonic(&tree);
            let _ = propagate_differents(&tree, 5, None);
            assert_eq!(ReductionTree::from_json(&tree.to_json()).ok(), Some(tree));
        }
    }
});
