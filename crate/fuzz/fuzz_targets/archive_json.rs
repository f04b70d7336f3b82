#![no_main]

use libfuzzer_sys::fuzz_target;
use sem4d_core::semantics::InstanceTable;
use sem4d_core::tensor::Archive;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(archive) = Archive::from_json_str(text) {
        let again = serde_json::to_string(&archive).expect("archive serializes");
        Archive::from_json_str(&again).expect("serialized archive parses");
    }
    let members: Vec<u32> = (0..64).collect();
    if let Ok(table) = InstanceTable::from_json_and_members(text, &members) {
        for inst in &table.instances {
            assert!(inst.members.iter().all(|m| (*m as usize) < members.len()));
        }
    }
});
