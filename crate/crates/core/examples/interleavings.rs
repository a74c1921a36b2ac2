//! Exhaustive schedules of small concurrent scenarios, and replay of a
//! schedule from its text form.

use mvgc::oracle::explore::{explore, explore_random, replay, reachable_stamps, CompactScenario, PdlScenario, Schedule};

fn main() {
    let st = explore(&mut PdlScenario::adjacent_removes(), 200).unwrap();
    println!("remove(a) || remove(b) on s<-a<-b<-c: {} schedules, {} states, longest {}", st.schedules, st.states, st.max_len);

    let st = explore(&mut PdlScenario::racing_appends(3), 200).unwrap();
    println!("three racing appends: {} schedules, exactly one winner in each", st.schedules);

    let mut c = CompactScenario::example();
    let st = explore(&mut c, 200).unwrap();
    println!("two compactions of [1,2,4,5,7] with A=[3], t=6: {} schedules", st.schedules);

    let schedule: Schedule = "0 1 1 0 0 1".parse().unwrap();
    replay(&mut c, &schedule).unwrap();
    println!("replayed `{schedule}`: reachable {:?}", reachable_stamps(&c));

    let st = explore_random(&mut PdlScenario::removes(6, &[1, 2, 3, 4]), 2000, 1, 400).unwrap();
    println!("four concurrent removes, {} random schedules: no violation", st.schedules);
}
