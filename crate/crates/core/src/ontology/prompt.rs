use crate::corpus::Article;

/// Extraction instructions sent ahead of every article. The `"Class:"` key
/// is reproduced as printed in the original template.
pub const PROMPT_TEMPLATE: &str = r#"Your task is to create an ontology for a given news article. The ontology consists of the following elements:
    - Classes: are the main formalized element of the article
    - Objects: are the representation of the main objects of the article and represent instances of a class
    - Relationships: are links or relationships between the objects for representing the ontology structure
Please answer in the following JSON format:
{
  "Class:" ["ClassName"],
  "Object": [{
    "Name": "ObjectName",
    "InstanceOf": "Class"
  }],
  "Relationship": {
    "RelationshipName": {
      "RelationshipFrom": "ObjectName",
      "RelationshipTo": "ObjectName"
    }
  }
}
Please consider that "RelationshipName" should be an active verb and optionally contain a preposition.
Please create an ontology of the following article:"#;

/// Template, newline, title, blank line, body.
pub fn build_prompt_text(title: &str, body: &str) -> String {
    let mut s = String::with_capacity(PROMPT_TEMPLATE.len() + title.len() + body.len() + 3);
    s.push_str(PROMPT_TEMPLATE);
    s.push('\n');
    s.push_str(title);
    s.push_str("\n\n");
    s.push_str(body);
    s
}

/// Prompt for an article whose body has already been cleaned.
pub fn build_prompt(article: &Article, cleaned_body: &str) -> String {
    build_prompt_text(&article.title, cleaned_body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_article_is_template_plus_separators() {
        assert_eq!(build_prompt_text("", ""), format!("{PROMPT_TEMPLATE}\n\n\n"));
    }

    #[test]
    fn prompts_differ_only_after_the_template() {
        let a = build_prompt_text("One", "Body one.");
        let b = build_prompt_text("Two", "Body two.");
        assert_eq!(a[..PROMPT_TEMPLATE.len()], b[..PROMPT_TEMPLATE.len()]);
        assert_ne!(a, b);
        assert!(PROMPT_TEMPLATE.contains("should be an active verb and optionally contain a preposition"));
    }
}
