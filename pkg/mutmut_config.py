def pre_mutation(context):
    if context.filename == 'setup.py' or context.filename.endswith('tests/backends.py'):
        context.skip = True
        return
    line = context.current_source_line.strip()
    # log_format, log_file and friends are real code
    if line.startswith('logger.'):
        context.skip = True
