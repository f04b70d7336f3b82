#![no_main]

use libfuzzer_sys::fuzz_target;
use sem4d_core::tensor::{decode, encode, Element, TensorError};

fn check<T: Element>(bytes: &[u8], shape: &[usize]) {
    match decode::<T>(bytes, shape) {
        Ok(values) => assert_eq!(encode(&values), bytes),
        Err(TensorError::ByteLength { .. } | TensorError::ShapeOverflow(_)) => {}
        Err(e) => panic!("unexpected error {e}"),
    }
}

// Byte 0 picks the dtype, byte 1 the rank, then one byte per dimension
// (255 stands for a huge extent); the rest is the blob.
fuzz_target!(|data: &[u8]| {
    let [dtype, rank, rest @ ..] = data else { return };
    let rank = (*rank % 5) as usize;
    if rest.len() < rank {
        return;
    }
    let (dims, bytes) = rest.split_at(rank);
    let shape: Vec<usize> = dims
        .iter()
        .map(|&d| if d == 255 { usize::MAX / 3 } else { d as usize })
        .collect();
    match dtype % 5 {
        0 => check::<f32>(bytes, &shape),
        1 => check::<f64>(bytes, &shape),
        2 => check::<u8>(bytes, &shape),
        3 => check::<u16>(bytes, &shape),
        _ => check::<u32>(bytes, &shape),
    }
});
