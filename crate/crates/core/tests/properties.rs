//! Property tests over the storage algebra, hashing, trace format, and
//! planning arithmetic.

use proptest::prelude::*;
use xorht_core::engine::Operation;
use xorht_core::h3::H3Matrix;
use xorht_core::resource::{blocks_for_table, table_memory_bits, DeviceProfile, TableGeometry};
use xorht_core::workload::trace::{format_trace, parse_trace, TraceData};
use xorht_core::xorstore::{blocks_required, Replica, SlotGeometry, XorMemSpec};

fn arb_op(key_bits: u32) -> impl Strategy<Value = Operation> {
    let key = 0u128..(1u128 << key_bits);
    let value = 0u128..(1u128 << key_bits);
    prop_oneof![
        key.clone().prop_map(|key| Operation::Search { key }),
        (key.clone(), value.clone()).prop_map(|(key, value)| Operation::Insert { key, value }),
        (key.clone(), value).prop_map(|(key, value)| Operation::Update { key, value }),
        key.prop_map(|key| Operation::Delete { key }),
    ]
}

proptest! {
    #[test]
    fn h3_linearity_random_widths(
        key_bits in 1u32..64,
        index_bits in 1u32..32,
        seed in any::<u64>(),
        a in any::<u64>(),
        b in any::<u64>(),
    ) {
        let m = H3Matrix::new(key_bits, index_bits, seed).unwrap();
        let mask = if key_bits >= 64 { u64::MAX } else { (1u64 << key_bits) - 1 };
        let (x, y) = ((a & mask) as u128, (b & mask) as u128);
        prop_assert_eq!(m.hash(x ^ y), m.hash(x) ^ m.hash(y));
    }

    #[test]
    fn quiescent_commits_in_either_owner_order_decode_identically(
        seed in any::<u64>(),
        owners in (0usize..3, 0usize..3).prop_filter("distinct owners", |(a, b)| a != b),
    ) {
        let geom = SlotGeometry::new(32, 32);
        let mut rng = xorht_core::rng::SplitMix64::new(seed);
        let mut a = Replica::new(3, 4, 2, geom);
        for cycle in 0..4u64 {
            let owner = rng.below(3) as usize;
            let word = a.encode_upsert(owner, 1, 0, rng.key_bits(32), rng.key_bits(32));
            a.bank_mut(owner).apply_write(1, 0, word, cycle).unwrap();
        }
        let mut b = a.clone();
        let (o1, o2) = owners;
        let w1 = a.encode_upsert(o1, 1, 0, rng.key_bits(32), rng.key_bits(32));
        let w2 = a.encode_delete(o2, 1, 0);
        a.bank_mut(o1).apply_write(1, 0, w1, 10).unwrap();
        a.bank_mut(o2).apply_write(1, 0, w2, 11).unwrap();
        b.bank_mut(o2).apply_write(1, 0, w2, 10).unwrap();
        b.bank_mut(o1).apply_write(1, 0, w1, 11).unwrap();
        prop_assert_eq!(a.decode_slot(1, 0), b.decode_slot(1, 0));
    }

    #[test]
    fn trace_text_round_trips(ops in proptest::collection::vec(arb_op(32), 0..200)) {
        let data = TraceData { key_bits: 32, value_bits: 32, ops };
        let text = format_trace(&data);
        let back = parse_trace(&text).unwrap();
        prop_assert_eq!(&back.ops, &data.ops);
        prop_assert_eq!(format_trace(&back), text);
    }

    #[test]
    fn shared_port_blocks_never_exceed_original(m in 1u64..32, n in 1u64..32) {
        let spec = XorMemSpec { read_ports: m, write_ports: n };
        prop_assert!(blocks_required(spec, true) <= blocks_required(spec, false));
        prop_assert_eq!(blocks_required(spec, false), n * (n - 1 + m));
    }

    #[test]
    fn block_quantization_only_rounds_up(
        p in 1u64..=16,
        k in 1u64..=16,
        entries in 1u64..200_000,
        slots in 1u64..=8,
        key_bits in 1u64..=128,
        value_bits in 1u64..=128,
    ) {
        prop_assume!(k <= p);
        let geom = TableGeometry { pe_count: p, mutation_pes: k, entries, slots, key_bits, value_bits };
        for device in [DeviceProfile::u250(), DeviceProfile::stratix10()] {
            let usage = blocks_for_table(&geom, &device);
            let bits = usage.total_blocks * device.block_depth * device.block_width;
            prop_assert!(bits >= table_memory_bits(&geom));
        }
    }
}
