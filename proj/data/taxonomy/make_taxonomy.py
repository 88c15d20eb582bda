#!/usr/bin/env python3
"""Writes taxonomy.v5.json and the earlier lineage fixtures v1..v4.

v5 is the runtime taxonomy. v1..v4 record how the task JSON grew:
  v1  four tasks, name/description/abstract/encodings only
  v2  + examples and recommended visualizations
  v3  seven tasks, + encoding descriptions
  v4  same task JSON as v3 (instruction-only revision)
  v5  + follow-up operation permutations
The output format matches nlohmann::ordered_json::dump(2) plus a trailing newline.
"""
import json
import os

HERE = os.path.dirname(os.path.abspath(__file__))

Q, N, O, T = "Quantitative", "Nominal", "Ordinal", "Temporal"


def rule(channel, *types):
    return {"encoding": channel, "dataTypes": list(types)}


TASKS = [
    {
        "id": "correlation",
        "name": "Correlation",
        "description": "Determine useful relationships between the values of two or more quantitative attributes.",
        "proFormaAbstract": "What is the correlation between attributes X and Y over a given set S of data cases?",
        "examples": [
            "Is there a relationship between production budget and worldwide gross?",
            "Show horsepower against miles per gallon.",
            "Do heavier cars accelerate more slowly?",
        ],
        "attributeDataTypesAndVisualEncodings": [
            rule("X axis", Q), rule("Y axis", Q), rule("Color", N, O), rule("Size", Q),
        ],
        "attributesAndVisualEncodingsDescription": "Map the first quantitative attribute to the x channel and the second to the y channel, both with type \"quantitative\" and no aggregate. A third quantitative attribute may be mapped to size. A nominal or ordinal attribute may be mapped to color.",
        "recommendedVisualizations": ["point"],
    },
    {
        "id": "distribution",
        "name": "Distribution",
        "description": "Characterize the distribution of the values of an attribute over a set of data cases.",
        "proFormaAbstract": "What is the distribution of values of attribute A in a set S of data cases?",
        "examples": [
            "Show the distribution of IMDb ratings.",
            "How are running times spread out?",
            "What does the spread of profit look like for each region?",
        ],
        "attributeDataTypesAndVisualEncodings": [
            rule("X axis", Q, N, O), rule("Y axis", Q), rule("Color", N), rule("Column", N),
        ],
        "attributesAndVisualEncodingsDescription": "For a quantitative attribute, put it on x with \"bin\": true and a \"count\" aggregate on y to draw a histogram, or put raw values on x with a tick mark to draw a strip plot. For a nominal attribute, put its values on x and a \"count\" aggregate on y. A second nominal attribute may split the chart by color or column; a boxplot places the nominal attribute on x and the quantitative attribute on y.",
        "recommendedVisualizations": ["bar", "tick", "boxplot"],
    },
    {
        "id": "derived_value",
        "name": "Derived Value",
        "description": "Compute an aggregate numeric representation (sum, mean, count, minimum, maximum) of a set of data cases.",
        "proFormaAbstract": "What is the value of aggregation function F over a given set S of data cases?",
        "examples": [
            "What is the average horsepower by origin?",
            "Show total sales for each region.",
            "How many movies are there per genre?",
        ],
        "attributeDataTypesAndVisualEncodings": [
            rule("X axis", N, O, T), rule("Y axis", Q), rule("Color", N), rule("Theta", Q),
        ],
        "attributesAndVisualEncodingsDescription": "Put the grouping attribute on x and the quantitative attribute on y with an \"aggregate\" of \"sum\", \"mean\", \"count\", \"min\" or \"max\" as requested. For a part-to-whole question use an arc mark with the aggregate on theta and the grouping attribute on color. An attribute computed from existing attributes is declared with a \"calculate\" transform and marked as derived in the attributeMap.",
        "recommendedVisualizations": ["bar", "arc"],
    },
    {
        "id": "trend",
        "name": "Trend",
        "description": "Characterize how a quantitative attribute changes over time or another ordered dimension.",
        "proFormaAbstract": "What is the trend of attribute A over time T for a set S of data cases?",
        "examples": [
            "How has the average budget changed over the years?",
            "Show sales over order date.",
            "Plot miles per gallon across model years.",
        ],
        "attributeDataTypesAndVisualEncodings": [
            rule("X axis", T, O), rule("Y axis", Q), rule("Color", N),
        ],
        "attributesAndVisualEncodingsDescription": "Put the temporal attribute on x with type \"temporal\" (use \"timeUnit\" to bucket dates) and the quantitative attribute on y with an aggregate. A nominal attribute may be mapped to color to draw one line per category.",
        "recommendedVisualizations": ["line", "area"],
    },
    {
        "id": "filter",
        "name": "Filter",
        "description": "Find data cases satisfying a set of concrete conditions on attribute values.",
        "proFormaAbstract": "Which data cases satisfy conditions {A, B, C...}?",
        "examples": [
            "Show only movies with a budget above 100 million.",
            "Only include cars made in Europe.",
            "Show orders from the West region.",
        ],
        "attributeDataTypesAndVisualEncodings": [
            rule("X axis", Q, N, O, T), rule("Y axis", Q, N, O, T), rule("Color", N),
        ],
        "attributesAndVisualEncodingsDescription": "Add a \"filter\" transform whose predicate encodes the condition, for example {\"filter\": {\"field\": \"Origin\", \"equal\": \"Europe\"}} or {\"filter\": {\"field\": \"Sales\", \"gt\": 100}}. Keep the encodings of the other detected tasks; if no other task is present, encode the filtered attribute.",
        "recommendedVisualizations": ["bar", "point", "line"],
    },
    {
        "id": "sort",
        "name": "Sort",
        "description": "Rank a set of data cases according to an ordinal metric.",
        "proFormaAbstract": "What is the sorted order of a set S of data cases according to their value of attribute A?",
        "examples": [
            "Sort genres by average gross.",
            "Rank car makers by horsepower in descending order.",
            "Order sub-categories by total sales.",
        ],
        "attributeDataTypesAndVisualEncodings": [
            rule("X axis", N, O), rule("Y axis", Q),
        ],
        "attributesAndVisualEncodingsDescription": "Sort the nominal axis by the quantitative encoding with \"sort\": \"-y\" for descending or \"sort\": \"y\" for ascending order.",
        "recommendedVisualizations": ["bar"],
    },
    {
        "id": "find_extremum",
        "name": "Find Extremum",
        "description": "Find data cases possessing an extreme value of an attribute over its range within the data set.",
        "proFormaAbstract": "What are the top/bottom N data cases with respect to attribute A?",
        "examples": [
            "Which movie has the highest worldwide gross?",
            "What are the five lightest cars?",
            "Which state has the most profit?",
        ],
        "attributeDataTypesAndVisualEncodings": [
            rule("X axis", N, O), rule("Y axis", Q), rule("Color", N),
        ],
        "attributesAndVisualEncodingsDescription": "Put the entity on x and the attribute on y, sort by y, and keep the top or bottom N cases with a \"window\" rank transform followed by a \"filter\", or highlight the extreme case with color.",
        "recommendedVisualizations": ["bar"],
    },
]

FOLLOWUPS = [
    ("Add", "Attribute",
     "Add the referenced attribute to the attributeMap with its query phrase, attach it to the relevant taskMap entries, and encode it in every visualization of the visList on an unused channel that accepts its datatype.",
     ["Also break it down by genre.", "Add horsepower to this chart."]),
    ("Add", "Task",
     "Infer the new analytic task from the query, add it to the taskMap with its attributes, and update every visualization of the visList so it reflects the added task (for example a filter transform or a sort).",
     ["Also show the trend over time.", "Now only include movies released after 2000."]),
    ("Add", "VisualizationType",
     "Keep the attributeMap and taskMap and add a visualization of the requested type to the visList, using encodings supported by the tasks in the taskMap.",
     ["Also show this as a line chart.", "Add a scatterplot as well."]),
    ("Remove", "Attribute",
     "Remove the attribute from the attributeMap, remove it from every taskMap entry (dropping entries left without attributes), and remove its encodings from every visualization of the visList.",
     ["Remove the color encoding by genre.", "Drop horsepower."]),
    ("Remove", "Task",
     "Remove the task from the taskMap and undo its effect on the visList, for example by deleting the filter transform, sort, or aggregate it introduced.",
     ["Remove the filter.", "Stop sorting the bars."]),
    ("Remove", "VisualizationType",
     "Remove every visualization of the named type from the visList; if none remain, recommend another type supported by the tasks in the taskMap.",
     ["Get rid of the bar chart.", "Remove the line chart."]),
    ("Replace", "Attribute",
     "Replace the old attribute with the new one in the attributeMap, the taskMap, and every encoding of the visList, changing the encoding type to the new attribute's datatype.",
     ["Show budget instead of gross.", "Replace horsepower with weight."]),
    ("Replace", "Task",
     "Replace the old task in the taskMap with the newly inferred task and regenerate the visList encodings from the new task's recommended visualizations.",
     ["Show the distribution instead of the average.", "Instead of filtering, sort by profit."]),
    ("Replace", "VisualizationType",
     "Change the mark of the visualizations in the visList to the requested type while keeping the attributes and tasks, adjusting encodings the new type requires (an arc needs theta and color).",
     ["Make it a line chart instead.", "Show this as a pie chart."]),
]


def dump(doc, name):
    with open(os.path.join(HERE, name), "w") as f:
        f.write(json.dumps(doc, indent=2, ensure_ascii=False))
        f.write("\n")


def pick(task, keys):
    return {k: task[k] for k in keys}


def main():
    v1_keys = ["id", "name", "description", "proFormaAbstract", "attributeDataTypesAndVisualEncodings"]
    v2_keys = ["id", "name", "description", "proFormaAbstract", "examples",
               "attributeDataTypesAndVisualEncodings", "recommendedVisualizations"]
    v3_keys = list(TASKS[0].keys())
    first_four = [t for t in TASKS if t["id"] in ("correlation", "derived_value", "distribution", "trend")]

    dump({"version": "v1", "analyticTasks": [pick(t, v1_keys) for t in first_four]}, "taxonomy.v1.json")
    dump({"version": "v2", "analyticTasks": [pick(t, v2_keys) for t in first_four]}, "taxonomy.v2.json")
    dump({"version": "v3", "analyticTasks": [pick(t, v3_keys) for t in TASKS]}, "taxonomy.v3.json")
    dump({"version": "v4", "analyticTasks": [pick(t, v3_keys) for t in TASKS]}, "taxonomy.v4.json")
    followups = [{"action": a, "target": t, "instructions": i, "examples": e} for a, t, i, e in FOLLOWUPS]
    dump({"version": "v5", "analyticTasks": TASKS, "followUpOperations": followups}, "taxonomy.v5.json")


if __name__ == "__main__":
    main()
