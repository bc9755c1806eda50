use ced_core::logit_store::{compress_topk, record_size, DenseLogits, StoreHeader, StoreReader, StoreWriter, HEADER_SIZE};
use proptest::prelude::*;

fn dense(c: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=1.0, c)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn written_records_read_back_quantized(
        (c, k, rows) in (2usize..40).prop_flat_map(|c| (Just(c), 1..=c, prop::collection::vec(dense(c), 1..12))),
        epochs in 1u16..4,
        seed in any::<u32>(),
    ) {
        let n = rows.len() as u64;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ceds");
        let header = StoreHeader::new(n, c as u32, k as u16, epochs).unwrap();
        let mut writer = StoreWriter::create(&path, header).unwrap();
        let mut expected = Vec::new();
        // epochs written newest first to exercise positional writes
        for e in (0..epochs).rev() {
            for (s, row) in rows.iter().enumerate() {
                let rec = compress_topk(&DenseLogits::new(row.clone()).unwrap(), k)
                    .unwrap()
                    .with_seed(seed.wrapping_add(s as u32 + 1000 * e as u32));
                writer.append_record(s as u64, e, &rec).unwrap();
                expected.push((s as u64, e, rec.quantized()));
            }
        }
        writer.finish().unwrap();

        let size = std::fs::metadata(&path).unwrap().len();
        prop_assert_eq!(size, HEADER_SIZE + n * epochs as u64 * record_size(k as u64));
        prop_assert_eq!(record_size(k as u64), 4 * k as u64 + 4);
        let reader = StoreReader::open(&path).unwrap();
        prop_assert_eq!(*reader.header(), header);
        for (s, e, rec) in expected {
            prop_assert_eq!(reader.read_record(s, e).unwrap(), rec);
        }
    }
}
