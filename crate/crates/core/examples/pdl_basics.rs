//! Append versions to a doubly-linked version list, remove superseded ones
//! out of order, and search by timestamp.

use mvgc::heap::Heap;
use mvgc::pdl::PdlList;
use mvgc::Timestamp;

fn main() {
    let heap = Heap::new();
    let list = PdlList::new(&heap, 0u64);
    let mut nodes = vec![];
    for (ts, val) in [(1, 10), (3, 30), (4, 40), (8, 80)] {
        let y = PdlList::node(&heap, Timestamp(ts), val);
        assert!(list.try_append(list.head(), y));
        nodes.push(y);
    }

    // appending to something that is no longer the head fails
    let late = PdlList::node(&heap, Timestamp(9), 90);
    assert!(!list.try_append(nodes[1], late));

    for k in [0, 2, 5, 10] {
        println!("search({k}) = {}", list.search(Timestamp(k)));
    }

    // any superseded node can go, given just its handle
    let c = list.remove(nodes[2]) + list.remove(nodes[1]);
    let al: Vec<_> = list.abstract_list().iter().map(|n| n.val()).collect();
    println!("after removing 30 and 40: {al:?} (chain steps {c})");
    println!("search(5) now = {}", list.search(Timestamp(5)));
}
