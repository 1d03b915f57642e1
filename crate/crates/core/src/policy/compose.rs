use thiserror::Error;

use super::types::{FunctionImpl, HelperSet, Program};
use crate::gateway::pysrc::unresolved_calls;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ComposeError {
    #[error("top-level `{0}` redefines a helper of the same name")]
    NameCollision(String),
}

/// Renders helpers (insertion order) followed by the top level.
pub fn compose(top_level: &FunctionImpl, helpers: &HelperSet) -> Result<Program, ComposeError> {
    if helpers.contains(&top_level.name) {
        return Err(ComposeError::NameCollision(top_level.name.clone()));
    }
    let context = helpers.render();
    let top = top_level.full_source();
    let rendered = if context.is_empty() { top.clone() } else { format!("{context}\n{top}") };
    Ok(Program {
        top_level: top_level.clone(),
        helpers: helpers.clone(),
        unresolved: unresolved_calls(&top, &context),
        rendered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::Origin;

    fn f(name: &str, body: &str) -> FunctionImpl {
        FunctionImpl::new(name, &format!("def {name}(x):\n    return {body}\n"), name, Origin::Helper)
    }

    #[test]
    fn empty_helpers_is_identity() {
        let top = f("top", "x");
        assert_eq!(compose(&top, &HelperSet::new()).unwrap().rendered, top.source);
    }

    #[test]
    fn order_and_idempotence() {
        let mut h = HelperSet::new();
        h.insert(f("a", "x"), true);
        h.insert(f("b", "a(x)"), true);
        let top = f("top", "b(x) + missing(x)");
        let p = compose(&top, &h).unwrap();
        let (ia, ib, it) = (p.rendered.find("def a").unwrap(), p.rendered.find("def b").unwrap(), p.rendered.find("def top").unwrap());
        assert!(ia < ib && ib < it);
        assert_eq!(p.unresolved, vec!["missing".to_string()]);
        assert_eq!(compose(&top, &h).unwrap().rendered, p.rendered);
    }

    #[test]
    fn collision() {
        let mut h = HelperSet::new();
        h.insert(f("a", "x"), true);
        assert_eq!(compose(&f("a", "1"), &h).unwrap_err(), ComposeError::NameCollision("a".into()));
    }
}
