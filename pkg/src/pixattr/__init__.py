"""pixattr: infer a UI button's attribute configuration from a pixel image.

The toolkit renders buttons synthetically, trains per-attribute convolutional
predictors on the rendered data, and refines predicted configurations with a
learned image-pair policy that measures similarity in attribute space.
"""

__version__ = "0.1.0"
