//! The same update stream through each reclamation scheme while a reader
//! holds an rtx open, then after it closes and everything is drained.

use mvgc::scheme::CellRef;
use mvgc::{Runtime, SchemeConfig, SchemeKind};

fn main() {
    for kind in SchemeKind::ALL {
        let mut rt = Runtime::new(SchemeConfig::new(kind, 2));
        let cells: Vec<_> = (0..4).map(|i| rt.new_cell(i)).collect();
        let (held, after_close) = {
            let mut reader = rt.participant();
            let mut writer = rt.participant();
            let t = reader.rtx_begin();
            for round in 0..50u64 {
                for c in &cells {
                    writer.begin_op();
                    let v = writer.peek(c);
                    // the cells outlive both participants
                    writer.cas(unsafe { CellRef::unowned(c) }, v, v + round);
                    writer.end_op();
                }
            }
            let snapshot: Vec<u64> = cells.iter().map(|c| reader.read_at(c, t)).collect();
            assert_eq!(snapshot, vec![0, 1, 2, 3]);
            let held: usize = cells.iter().map(|c| c.version_count()).sum();
            reader.rtx_end();
            for c in &cells {
                writer.begin_op();
                let v = writer.peek(c);
                writer.cas(unsafe { CellRef::unowned(c) }, v, v + 1);
                writer.end_op();
            }
            (held, cells.iter().map(|c| c.version_count()).sum::<usize>())
        };
        rt.drain();
        // Steam prunes a list only when that cell is written again
        std::thread::sleep(std::time::Duration::from_millis(2));
        {
            let mut w = rt.participant();
            for c in &cells {
                w.begin_op();
                let v = w.peek(c);
                w.cas(unsafe { CellRef::unowned(c) }, v, v + 1);
                w.end_op();
            }
        }
        rt.drain();
        let drained: usize = cells.iter().map(|c| c.version_count()).sum();
        let st = rt.stats();
        println!(
            "{kind:>5}: versions with rtx open {held:>3}, after it closed {after_close:>3}, drained + rewritten {drained} \
             (overwrites {}, compacts {}, removes {})",
            st.overwrites, st.compacts, st.removes
        );
    }
}
