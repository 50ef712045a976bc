//! Prompt templates, shipped verbatim as text resources under `data/prompts`.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Template {
    Summarize,
    DescribeFunctions,
    DescribeVariables,
    Verify,
    Patch,
}

pub const TARGET_CVE: &str = "{target_cve}";
pub const TARGET_CWE_TYPE: &str = "{target_cwe_type}";
pub const EXAMPLE_CWE_TYPE: &str = "{example_target_cwe_type}";
pub const ANON_VARIABLES: &str = "{anonymized variables' description from rag-db for target_cve}";
pub const ANON_FUNCTIONS: &str = "{anonymized functions' description from rag-db target_cve}";

pub struct Templates;

pub const TEMPLATES: Templates = Templates;

impl Templates {
    pub fn raw(&self, t: Template) -> &'static str {
        let text = match t {
            Template::Summarize => include_str!("../../data/prompts/summarize.txt"),
            Template::DescribeFunctions => include_str!("../../data/prompts/describe_functions.txt"),
            Template::DescribeVariables => include_str!("../../data/prompts/describe_variables.txt"),
            Template::Verify => include_str!("../../data/prompts/verify.txt"),
            Template::Patch => include_str!("../../data/prompts/patch.txt"),
        };
        text.strip_suffix('\n').unwrap_or(text)
    }

    /// Template text with each `(placeholder, value)` substituted literally.
    pub fn render(&self, t: Template, values: &[(&str, &str)]) -> String {
        let mut out = self.raw(t).to_string();
        for (key, value) in values {
            out = out.replace(key, value);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn placeholders_present_and_substituted() {
        let raw = TEMPLATES.raw(Template::Verify);
        for p in [TARGET_CVE, TARGET_CWE_TYPE, EXAMPLE_CWE_TYPE, ANON_VARIABLES, ANON_FUNCTIONS] {
            assert!(raw.contains(p), "{p}");
        }
        let out = TEMPLATES.render(Template::Verify, &[(TARGET_CVE, "CVE-1"), (TARGET_CWE_TYPE, "CWE-416")]);
        assert!(!out.contains(TARGET_CVE) && out.contains("similar to CVE-1"));
        assert!(TEMPLATES.raw(Template::Patch).contains(ANON_FUNCTIONS));
        assert!(TEMPLATES.raw(Template::Summarize).starts_with("**Role**: You are an expert software engineer without"));
        assert!(!TEMPLATES.raw(Template::DescribeVariables).ends_with('\n'));
    }
}
