//! Whole-list compaction of a singly-linked version list against a set of
//! announced rtx timestamps, checked against the brute-force needed set.

use mvgc::heap::Heap;
use mvgc::oracle::needed::needed_set;
use mvgc::ssl::SslList;
use mvgc::Timestamp;

fn main() {
    let heap = Heap::new();
    let list = SslList::new(&heap, 0u64);
    let stamps = [1, 2, 4, 5, 7];
    for &s in &stamps {
        list.try_append(list.head(), SslList::node(&heap, Timestamp(s), s as u64));
    }
    let show = |l: &SslList<u64>| l.reachable().iter().map(|n| n.ts().to_string()).collect::<Vec<_>>().join(" <- ");
    println!("before: {}", show(&list));

    // an rtx announced at 3 and any rtx starting at 6 or later
    let a = [Timestamp(3)];
    let t = Timestamp(6);
    let st = list.compact(&a, t, list.head());
    println!("after:  {}  ({} nodes visited, {} splices)", show(&list), st.traversed, st.splices);

    let hist: Vec<_> = stamps.iter().map(|&s| (s as u64, Timestamp(s))).collect();
    println!("needed by definition: {:?}", needed_set(&hist, &a, t));
}
