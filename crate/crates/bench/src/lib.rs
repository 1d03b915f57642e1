//! Inputs shared by the benchmarks.

/// A nested literal typical of test-case arguments.
pub const NESTED_LITERAL: &str =
    "[{'id': 1, 'tags': ('a', 'b'), 'score': 2.5}, {'id': 2, 'tags': (), 'score': -0.125}, [None, True, 'x\\ny'], 9223372036854775807]";

/// Recursion, loops and list building in one candidate.
pub const CANDIDATE: &str = "\
def fib(n):
    if n < 2:
        return n
    return fib(n - 1) + fib(n - 2)

def f(n):
    out = []
    for i in range(n):
        out.append(fib(i % 15))
    return sorted(out, reverse=True)[:5]
";

/// A generated test block with the usual noise.
pub fn assertion_block(cases: usize) -> String {
    let mut text = String::from("# tests\n");
    for i in 0..cases {
        text.push_str(&format!("assert f({i}, [{i}, {}]) == {}\n", i + 1, 2 * i + 1));
        if i % 5 == 0 {
            text.push_str(&format!(">>> f({i}, [])\n{i}\n"));
        }
    }
    text
}
